"""Self-check property suites behind the `verify` command.

Each suite samples randomized instances from a seeded generator and checks
one contract: fast-path equivalence against the dense oracle, gradient
correctness against finite differences and the diagonal-sum oracle,
projection optimality, spectral identities, and training-time structure
preservation. Output is deterministic for a fixed seed.
"""

from dataclasses import dataclass

import numpy as np

from .circulant import (
    CirculantBaseTensor,
    PartitionConfig,
    circulant_from_fiber,
    expand,
    project_matrix,
    project_tensor,
    reverse_fiber,
)
from .convops import (
    ConvGeometry,
    circ_backward_input,
    circ_backward_weight,
    circ_forward,
    conv_block,
    conv_naive,
)
from .nn import (
    SgdConfig,
    ToyTaskSpec,
    make_circ_toy_net,
    make_toy_task,
    train,
)
from . import spectral


@dataclass
class PropertyResult:
    name: str
    passed: bool
    detail: str

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


def _rel(a, b):
    scale = max(1.0, float(np.max(np.abs(a))), float(np.max(np.abs(b))))
    return float(np.max(np.abs(a - b))) / scale


def _random_instance(rng, n_choices=(1, 2, 3, 4, 8, 16), kernels=(1, 3, 5)):
    n = int(rng.choice(n_choices))
    r = int(rng.integers(1, 4))
    s = int(rng.integers(1, 4))
    k = int(rng.choice(kernels))
    spatial = int(rng.integers(max(k, 3), 9))
    cfg = PartitionConfig(n=n, c_in=r * n, c_out=s * n)
    base = CirculantBaseTensor(rng.standard_normal((k, k, r * n, s)), cfg)
    x = rng.standard_normal((spatial, spatial, r * n))
    g = ConvGeometry(pad=(k // 2, k // 2))
    return x, base, g


def check_forward_equivalence(seed, trials=60, tol=1e-9, sizes=(1, 2, 3, 4, 8, 16)):
    """circ_forward == conv_block == conv_naive on the dense expansion."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        x, base, g = _random_instance(rng, n_choices=sizes)
        dense = expand(base)
        y_fast = circ_forward(x, base, g)
        worst = max(worst, _rel(y_fast, conv_block(x, dense, base.config, g)))
        worst = max(worst, _rel(y_fast, conv_naive(x, dense, g)))
        if worst > tol:
            break
    return PropertyResult(
        "forward-oracle-equivalence",
        worst <= tol,
        f"{trials} instances, max rel diff {worst:.3e} (tol {tol:.0e})",
    )


def check_gradients(seed, trials=12, fd_tol=1e-4, oracle_tol=1e-9):
    """Both backward passes vs central finite differences and the
    dense-expansion diagonal-sum oracle."""
    rng = np.random.default_rng(seed)
    worst_fd, worst_oracle = 0.0, 0.0
    h = 1e-5
    for _ in range(trials):
        n = int(rng.choice([1, 2, 3, 4]))
        r, s = int(rng.integers(1, 3)), int(rng.integers(1, 3))
        k = int(rng.choice([1, 2]))
        cfg = PartitionConfig(n=n, c_in=r * n, c_out=s * n)
        base = CirculantBaseTensor(rng.standard_normal((k, k, r * n, s)), cfg)
        spatial = int(rng.integers(k + 1, 5))
        x = rng.standard_normal((spatial, spatial, r * n))
        g = ConvGeometry()
        y = circ_forward(x, base, g)
        target = rng.standard_normal(y.shape)
        gy = y - target

        got_w = circ_backward_weight(x, gy, base, g)
        got_x = circ_backward_input(gy, base, g)

        # oracle: dense kernel gradient summed along circulant diagonals
        dw = np.zeros((k, k, cfg.padded_in, cfg.padded_out))
        w2, h2 = y.shape[:2]
        for a in range(k):
            for b in range(k):
                dw[a, b] = np.einsum("whc,whd->cd", x[a : a + w2, b : b + h2], gy)
        diag = np.zeros_like(base.base)
        for rr in range(cfg.r):
            for ss in range(cfg.s):
                blk = dw[:, :, rr * n : (rr + 1) * n, ss * n : (ss + 1) * n]
                for p in range(n):
                    diag[:, :, rr * n + p, ss] = sum(
                        blk[:, :, aa, (aa + p) % n] for aa in range(n)
                    )
        worst_oracle = max(worst_oracle, _rel(got_w, diag))

        def loss_of_base(arr):
            yy = circ_forward(x, CirculantBaseTensor(arr, cfg), g)
            return 0.5 * float(np.sum((yy - target) ** 2))

        flat = base.base.copy()
        for idx in map(tuple, rng.integers(0, np.array(flat.shape), size=(6, 4))):
            keep = flat[idx]
            flat[idx] = keep + h
            lp = loss_of_base(flat)
            flat[idx] = keep - h
            lm = loss_of_base(flat)
            flat[idx] = keep
            fd = (lp - lm) / (2 * h)
            denom = max(abs(fd), abs(got_w[idx]), 1e-8)
            worst_fd = max(worst_fd, abs(fd - got_w[idx]) / denom)

        for idx in map(tuple, rng.integers(0, np.array(x.shape), size=(6, 3))):
            keep = x[idx]
            x[idx] = keep + h
            lp = 0.5 * float(np.sum((circ_forward(x, base, g) - target) ** 2))
            x[idx] = keep - h
            lm = 0.5 * float(np.sum((circ_forward(x, base, g) - target) ** 2))
            x[idx] = keep
            fd = (lp - lm) / (2 * h)
            denom = max(abs(fd), abs(got_x[idx]), 1e-8)
            worst_fd = max(worst_fd, abs(fd - got_x[idx]) / denom)
    ok = worst_fd <= fd_tol and worst_oracle <= oracle_tol
    return PropertyResult(
        "gradient-correctness",
        ok,
        f"{trials} nets, worst fd rel {worst_fd:.3e} (tol {fd_tol:.0e}), "
        f"worst oracle rel {worst_oracle:.3e} (tol {oracle_tol:.0e})",
    )


def check_adjoint(seed, trials=20, tol=1e-9):
    """<forward(x), g> == <x, backward_input(g)>."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        x, base, g = _random_instance(rng, n_choices=(1, 2, 3, 4, 8))
        y = circ_forward(x, base, g)
        gy = rng.standard_normal(y.shape)
        lhs = float(np.sum(y * gy))
        rhs = float(np.sum(x * circ_backward_input(gy, base, g)))
        worst = max(worst, abs(lhs - rhs) / max(1.0, abs(lhs)))
    return PropertyResult(
        "adjoint-consistency", worst <= tol,
        f"{trials} instances, worst rel gap {worst:.3e} (tol {tol:.0e})",
    )


def check_forward_linearity(seed, trials=15, tol=1e-10):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        x1, base, g = _random_instance(rng, n_choices=(1, 2, 4, 8))
        x2 = rng.standard_normal(x1.shape)
        al, be = rng.standard_normal(2)
        lhs = circ_forward(al * x1 + be * x2, base, g)
        rhs = al * circ_forward(x1, base, g) + be * circ_forward(x2, base, g)
        worst = max(worst, _rel(lhs, rhs))
    return PropertyResult(
        "forward-linearity", worst <= tol,
        f"{trials} instances, max rel diff {worst:.3e} (tol {tol:.0e})",
    )


def check_projection(seed, candidates=1000, tol=1e-12):
    """Projection beats random circulant candidates and is idempotent."""
    rng = np.random.default_rng(seed)
    beaten = True
    worst_idem = 0.0
    for n in (2, 3, 4, 8):
        m = rng.standard_normal((n, n))
        w = project_matrix(m)
        best = np.linalg.norm(m - circulant_from_fiber(w))
        for _ in range(candidates):
            cand = w + rng.standard_normal(n) * rng.choice([1e-3, 0.1, 1.0])
            if np.linalg.norm(m - circulant_from_fiber(cand)) <= best:
                beaten = False
        worst_idem = max(
            worst_idem,
            float(np.max(np.abs(project_matrix(circulant_from_fiber(w)) - w))),
        )
        cfg = PartitionConfig(n=n, c_in=2 * n, c_out=n)
        t = rng.standard_normal((2, 2, 2 * n, n))
        once, _ = project_tensor(t, cfg)
        twice, _ = project_tensor(expand(once), cfg)
        worst_idem = max(worst_idem, float(np.max(np.abs(twice.base - once.base))))
    ok = beaten and worst_idem <= tol
    return PropertyResult(
        "projection-optimality", ok,
        f"beats {candidates} candidates per N in (2,3,4,8): {beaten}; "
        f"idempotence defect {worst_idem:.3e} (tol {tol:.0e})",
    )


def check_projection_closed_form_n2(seed, trials=40, tol=1e-14):
    """At N=2 the projection matches the closed-form least squares over the
    two-parameter circulant family."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        m = rng.standard_normal((2, 2))
        w = project_matrix(m)
        worst = max(worst, abs(w[0] - (m[0, 0] + m[1, 1]) / 2))
        worst = max(worst, abs(w[1] - (m[0, 1] + m[1, 0]) / 2))
    return PropertyResult(
        "projection-closed-form-n2", worst <= tol,
        f"{trials} matrices, max defect {worst:.3e} (tol {tol:.0e})",
    )


def check_parameter_division(seed, trials=20):
    """Free-parameter count is dense/N exactly when N divides both channels."""
    rng = np.random.default_rng(seed)
    ok = True
    for _ in range(trials):
        n = int(rng.choice([1, 2, 4, 8]))
        r, s = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        k = int(rng.choice([1, 3]))
        cfg = PartitionConfig(n=n, c_in=r * n, c_out=s * n)
        base = CirculantBaseTensor(rng.standard_normal((k, k, r * n, s)), cfg)
        ok &= base.num_free_parameters * n == expand(base).size
    return PropertyResult(
        "parameter-count-division", ok, f"{trials} shapes, dense = N * free: {ok}"
    )


def check_projection_linearity(seed, trials=25, tol=1e-12):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        n = int(rng.choice([2, 3, 5, 8]))
        a, b = rng.standard_normal((n, n)), rng.standard_normal((n, n))
        al, be = rng.standard_normal(2)
        lhs = project_matrix(al * a + be * b)
        rhs = al * project_matrix(a) + be * project_matrix(b)
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return PropertyResult(
        "projection-linearity", worst <= tol,
        f"{trials} pairs, max abs defect {worst:.3e} (tol {tol:.0e})",
    )


def check_spectral(seed, max_n=32, tol_dft=1e-10, tol_prop=1e-9):
    """Direct-DFT agreement, Parseval, convolution theorem, N=2 realness."""
    rng = np.random.default_rng(seed)
    worst_dft, worst_parseval, worst_conv = 0.0, 0.0, 0.0
    for n in range(1, max_n + 1):
        f = rng.standard_normal(n)
        k = np.arange(n)
        direct = (f[None, :] * np.exp(-2j * np.pi * np.outer(k, k) / n)).sum(axis=1)
        worst_dft = max(worst_dft, float(np.max(np.abs(spectral.fft(f) - direct))))
        lhs = float(np.sum(f**2))
        rhs = float(np.sum(np.abs(spectral.fft(f)) ** 2) / n)
        worst_parseval = max(worst_parseval, abs(lhs - rhs) / max(1.0, abs(lhs)))
        a, b = rng.standard_normal(n), rng.standard_normal(n)
        got = spectral.ifft(spectral.hadamard(spectral.fft(a), spectral.fft(b)))
        direct_conv = np.array(
            [sum(a[t] * b[(kk - t) % n] for t in range(n)) for kk in range(n)]
        )
        scale = max(1.0, float(np.max(np.abs(direct_conv))))
        worst_conv = max(worst_conv, float(np.max(np.abs(got - direct_conv))) / scale)
    n2_real = bool(np.all(spectral.fft(rng.standard_normal(2)).imag == 0.0))
    ok = worst_dft <= tol_dft and worst_parseval <= tol_prop and worst_conv <= tol_prop
    return PropertyResult(
        "spectral-contract", ok and n2_real,
        f"N<=32: dft defect {worst_dft:.3e} (tol {tol_dft:.0e}), parseval "
        f"{worst_parseval:.3e}, conv theorem {worst_conv:.3e} (tol {tol_prop:.0e}), "
        f"N=2 real arithmetic: {n2_real}",
    )


def check_reverse_involution(seed, trials=30):
    rng = np.random.default_rng(seed)
    ok = True
    for _ in range(trials):
        n = int(rng.integers(1, 20))
        f = rng.standard_normal(n)
        ok &= bool(np.array_equal(reverse_fiber(reverse_fiber(f)), f))
    return PropertyResult("reverse-fiber-involution", ok, f"{trials} fibers")


def check_structure_preservation(seed, steps=40):
    """Expanded kernels stay exactly block-circulant through SGD."""
    spec = ToyTaskSpec(n_samples=32, spatial=(6, 6), channels=4, classes=3)
    data = make_toy_task(seed, spec=spec)
    net = make_circ_toy_net(seed + 1, n=2, spec=spec)
    train(net, data, SgdConfig(batch_size=8), steps=steps, seed=seed + 2)
    base = net.layers[0].base
    dense = expand(base)
    n = base.config.n
    exact = True
    for r in range(base.config.r):
        for s in range(base.config.s):
            blk = dense[:, :, r * n : (r + 1) * n, s * n : (s + 1) * n]
            for a in range(n):
                for b in range(n):
                    exact &= bool(
                        np.array_equal(
                            blk[:, :, a, b], blk[:, :, (a + 1) % n, (b + 1) % n]
                        )
                    )
    return PropertyResult(
        "structure-preservation", exact,
        f"{steps} SGD steps, expanded kernel exactly block-circulant: {exact}",
    )


def run_verification(seed=0, trials=60, sizes=(1, 2, 3, 4, 8, 16)):
    """Run every suite; returns the list of PropertyResult."""
    return [
        check_forward_equivalence(seed, trials=trials, sizes=sizes),
        check_gradients(seed + 1),
        check_adjoint(seed + 2),
        check_forward_linearity(seed + 3),
        check_projection(seed + 4),
        check_projection_linearity(seed + 5),
        check_projection_closed_form_n2(seed + 6),
        check_parameter_division(seed + 7),
        check_spectral(seed + 8),
        check_reverse_involution(seed + 9),
        check_structure_preservation(seed + 10),
    ]
