import numpy as np

from emg_reservoir.encoding import EventStream
from emg_reservoir.topology import Wiring


def tiny_wiring(n, edges, inputs, exc=None, n_channels=2):
    """Wiring from explicit (pre, post, w) and (channel, post, w) lists."""
    pre, post, w = (np.array(x) for x in zip(*edges)) if edges else (np.empty(0, int),) * 2 + (np.empty(0),)
    ch, ipost, iw = (np.array(x) for x in zip(*inputs)) if inputs else (np.empty(0, int),) * 2 + (np.empty(0),)
    return Wiring(
        positions=np.zeros((n, 3)),
        is_excitatory=np.ones(n, bool) if exc is None else np.asarray(exc, bool),
        rec_pre=pre.astype(np.int64), rec_post=post.astype(np.int64), rec_weight=w.astype(float),
        in_channel=ch.astype(np.int64), in_post=ipost.astype(np.int64), in_weight=iw.astype(float),
        n_channels=n_channels,
    )


def events(n_channels, duration_s, **times_ms):
    """EventStream with ``ch<k>=[ms, ...]`` keyword lists."""
    chans = [np.array(sorted(times_ms.get(f"ch{c}", []))) / 1000.0 for c in range(n_channels)]
    return EventStream(tuple(chans), duration_s)


def raw_layout(root, gestures, sessions=(1, 2, 3), reps=2, n=300, seed=0):
    """Fake raw dataset: one integer-valued CSV per subject/session/gesture/repetition."""
    rng = np.random.default_rng(seed)
    root.mkdir(parents=True, exist_ok=True)
    for subj in (1, 2):
        for sess in sessions:
            for g in gestures:
                for r in range(reps):
                    x = rng.integers(-128, 128, size=(n, 8))
                    np.savetxt(root / f"subject{subj:02d}_session{sess}_{g}_{r}.csv", x,
                               delimiter=",", fmt="%d")
