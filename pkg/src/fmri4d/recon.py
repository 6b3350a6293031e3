"""Motion-compensated 4D reconstruction by ADMM.

The estimate minimizes

    sum_n ||mask_n (A_n x_n - t_n)||^2  +  lambda_rank * sum_i alpha_i ||X_(i)||_tr
                                        +  lambda_tv * TV_3D(x)

where A_n is the slice-wise acquisition operator of :mod:`fmri4d.geometry`,
X_(i) are the four mode unfoldings, and TV_3D is a smoothed spatial total
variation applied per timepoint. The trace-norm terms are split off with
one auxiliary/dual pair per mode; the data + TV part is handled by a few
backtracking gradient steps per outer iteration.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import NumericError
from .geometry import AcquisitionGeometry, MotionTrajectory, ProjectionOperator
from .interp3d import reconstruct_series_3d
from .tensor4d import MODES, Volume4D, _tensor, fold, rank_surrogate, svt, unfold

_ARMIJO_C1 = 1e-4

CONVERGENCE_COLUMNS = (
    "iter", "objective", "data_fidelity", "rank_term", "tv_term",
    "rel_change", "primal_residual", "x_objective_start", "x_objective_end",
)


@dataclass(frozen=True)
class ReconConfig:
    """Solver knobs.

    lambda_rank, lambda_tv : float
        Regularizer weights, >= 0.
    alpha : 4-tuple
        Nonnegative unfolding weights summing to 1.
    rho : float
        ADMM penalty, > 0.
    epsilon : float
        Stop once ||x_k - x_{k-1}|| / ||t|| falls below this.
    max_outer_iters : int
    inner_steps : int
        Gradient steps per outer iteration.
    step_init, step_shrink, max_backtracks
        Armijo backtracking policy for the inner steps.
    tv_epsilon : float
        TV smoothing width, in normalized intensity units.
    """

    lambda_rank: float = 0.01
    lambda_tv: float = 0.01
    alpha: tuple = (0.25, 0.25, 0.25, 0.25)
    rho: float = 1.0
    epsilon: float = 1e-5
    max_outer_iters: int = 200
    inner_steps: int = 5
    step_init: float = 1e-2
    step_shrink: float = 0.5
    max_backtracks: int = 20
    tv_epsilon: float = 1e-3

    def __post_init__(self):
        if self.lambda_rank < 0 or self.lambda_tv < 0:
            raise ValueError("regularizer weights must be >= 0")
        alpha = tuple(float(a) for a in self.alpha)
        if len(alpha) != 4 or any(a < 0 for a in alpha):
            raise ValueError(f"alpha must be 4 nonnegative weights, got {self.alpha}")
        if abs(sum(alpha) - 1.0) > 1e-8:
            raise ValueError(f"alpha must sum to 1, got sum {sum(alpha)}")
        if not self.rho > 0:
            raise ValueError(f"rho must be > 0, got {self.rho}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if self.max_outer_iters < 1 or self.inner_steps < 1 or self.max_backtracks < 1:
            raise ValueError("iteration counts must be >= 1")
        if not self.step_init > 0:
            raise ValueError(f"step_init must be > 0, got {self.step_init}")
        if not 0 < self.step_shrink < 1:
            raise ValueError(f"step_shrink must be in (0, 1), got {self.step_shrink}")
        if not self.tv_epsilon > 0:
            raise ValueError(f"tv_epsilon must be > 0, got {self.tv_epsilon}")
        object.__setattr__(self, "alpha", alpha)


@dataclass(frozen=True)
class AdmmState:
    """One snapshot of the splitting variables.

    x is the current estimate, y the four mode auxiliaries, u the four
    scaled duals; all share x's shape. history holds one row per completed
    outer iteration.
    """

    x: Volume4D
    y: tuple
    u: tuple
    iteration: int = 0
    history: tuple = ()

    def __post_init__(self):
        if len(self.y) != 4 or len(self.u) != 4:
            raise ValueError("y and u must each hold 4 volumes")
        for v in (*self.y, *self.u):
            if v.shape != self.x.shape:
                raise ValueError(
                    f"auxiliary shape {v.shape} does not match x shape {self.x.shape}"
                )
        object.__setattr__(self, "y", tuple(self.y))
        object.__setattr__(self, "u", tuple(self.u))

    @classmethod
    def from_initial(cls, x0: Volume4D) -> "AdmmState":
        """Start at a consensus point: every auxiliary equals the
        initializer and the duals are zero, so an initializer that already
        fits the data is a fixed point of the iteration."""
        zero = x0.with_data(np.zeros_like(x0.data))
        return cls(x=x0, y=(x0,) * 4, u=(zero,) * 4)


@dataclass(frozen=True)
class ConvergenceReport:
    """Per-iteration solver trace, in normalized intensity units.

    Column arrays all have length ``iterations``. ``objective`` is
    data_fidelity + rank_term + tv_term with the lambda weights already
    applied. ``x_objective_start``/``x_objective_end`` bracket the inner
    gradient descent of each iteration (its objective includes the
    penalty terms, so it is not the same number as ``objective``).
    ``scale`` is the intensity normalization applied to the observation
    before solving; multiply intensities by it to return to input units.
    """

    iterations: int
    converged: bool
    objective: np.ndarray
    data_fidelity: np.ndarray
    rank_term: np.ndarray
    tv_term: np.ndarray
    rel_change: np.ndarray
    primal_residual: np.ndarray
    x_objective_start: np.ndarray
    x_objective_end: np.ndarray
    scale: float = 1.0

    def rows(self):
        """Yield one tuple per iteration in CONVERGENCE_COLUMNS order,
        1-based iteration index."""
        for k in range(self.iterations):
            yield (k + 1, self.objective[k], self.data_fidelity[k],
                   self.rank_term[k], self.tv_term[k], self.rel_change[k],
                   self.primal_residual[k], self.x_objective_start[k],
                   self.x_objective_end[k])


def _spatial_diffs(a):
    """Forward differences along the three spatial axes, replicate
    boundary (zero difference past the last plane)."""
    out = []
    for ax in range(3):
        d = np.zeros_like(a)
        head = [slice(None)] * a.ndim
        tail = [slice(None)] * a.ndim
        head[ax] = slice(0, a.shape[ax] - 1)
        tail[ax] = slice(1, a.shape[ax])
        d[tuple(head)] = a[tuple(tail)] - a[tuple(head)]
        out.append(d)
    return out


def _tv_value_arr(a, eps):
    gb, gk, gh = _spatial_diffs(a)
    mag = np.sqrt(gb * gb + gk * gk + gh * gh + eps * eps)
    return float(np.sum(mag - eps))


def _tv_gradient_arr(a, eps):
    gb, gk, gh = _spatial_diffs(a)
    mag = np.sqrt(gb * gb + gk * gk + gh * gh + eps * eps)
    grad = np.zeros_like(a)
    for ax, g in enumerate((gb, gk, gh)):
        w = g / mag
        # adjoint of the forward-difference operator above
        head = [slice(None)] * a.ndim
        shead = [slice(None)] * a.ndim
        head[ax] = slice(0, a.shape[ax] - 1)
        shead[ax] = slice(1, a.shape[ax])
        grad[tuple(head)] -= w[tuple(head)]
        grad[tuple(shead)] += w[tuple(head)]
    return grad


def tv_value(x, epsilon: float = 1e-3) -> float:
    """Smoothed spatial total variation, summed over timepoints.

    Per voxel: sqrt(g_b^2 + g_k^2 + g_h^2 + epsilon^2) - epsilon, with
    forward differences and replicate boundary. Zero exactly for
    spatially constant volumes, whatever their temporal behavior.
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    return _tv_value_arr(_tensor(x), epsilon)


def tv_gradient(x, epsilon: float = 1e-3):
    """Gradient of :func:`tv_value` at x. Returns the same kind (Volume4D
    in, Volume4D out)."""
    if not epsilon > 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    grad = _tv_gradient_arr(_tensor(x), epsilon)
    if isinstance(x, Volume4D):
        return x.with_data(grad)
    return grad


def _check_problem(x, t, geom, motion):
    if x.shape[:3] != geom.hr_dims:
        raise ValueError(f"x dims {x.shape[:3]} do not match HR dims {geom.hr_dims}")
    if t.shape[:3] != geom.lr_dims:
        raise ValueError(f"t dims {t.shape[:3]} do not match LR dims {geom.lr_dims}")
    if x.shape[3] != t.shape[3]:
        raise ValueError(f"x has {x.shape[3]} timepoints, t has {t.shape[3]}")
    if motion.n_timepoints != t.shape[3]:
        raise ValueError(
            f"motion has {motion.n_timepoints} timepoints, series has {t.shape[3]}"
        )


def data_fidelity(x, t, geom: AcquisitionGeometry, motion: MotionTrajectory,
                  threads: int = 1) -> float:
    """Masked sum of squared residuals ||mask (A x - t)||^2."""
    _check_problem(x, t, geom, motion)
    op = ProjectionOperator(geom, motion, threads)
    r = np.where(op.valid_mask, op.apply(_tensor(x)) - _tensor(t), 0.0)
    return float(np.vdot(r, r))


def objective(x, t, geom: AcquisitionGeometry, motion: MotionTrajectory,
              cfg: ReconConfig, threads: int = 1) -> float:
    """Full objective: data fidelity + weighted trace norms + weighted TV."""
    total = data_fidelity(x, t, geom, motion, threads)
    if cfg.lambda_rank > 0:
        total += cfg.lambda_rank * rank_surrogate(x, cfg.alpha)
    if cfg.lambda_tv > 0:
        total += cfg.lambda_tv * tv_value(x, cfg.tv_epsilon)
    return float(total)


def _inner_descent(x, ys, us, t, mask, op, cfg):
    """Armijo gradient descent on the x subproblem

        F(x) = ||mask (A x - t)||^2 + (rho/2) sum_i ||x - y_i + u_i||^2
                                    + lambda_tv * TV(x)

    Trial objectives along each ray are evaluated analytically for the two
    quadratic terms (one operator application per step, for A d), so only
    the TV term is recomputed per trial. Returns the updated x, the final
    masked residual, and the (start, end) subproblem values. F never
    increases: steps are only taken when they pass the decrease test.
    """
    rho, lam_tv, eps_tv = cfg.rho, cfg.lambda_tv, cfg.tv_epsilon
    zs = [y - u for y, u in zip(ys, us)]
    z_sum = zs[0] + zs[1] + zs[2] + zs[3]
    zz = sum(float(np.vdot(z, z)) for z in zs)

    r = np.where(mask, op.apply(x) - t, 0.0)
    data = float(np.vdot(r, r))
    xx = float(np.vdot(x, x))
    xz = float(np.vdot(x, z_sum))
    prox = 0.5 * rho * (4.0 * xx - 2.0 * xz + zz)
    tv_x = lam_tv * _tv_value_arr(x, eps_tv) if lam_tv > 0 else 0.0
    f_start = data + prox + tv_x
    f_cur = f_start

    for _ in range(cfg.inner_steps):
        grad = 2.0 * op.apply_adjoint(r) + rho * (4.0 * x - z_sum)
        if lam_tv > 0:
            grad += lam_tv * _tv_gradient_arr(x, eps_tv)
        if not np.all(np.isfinite(grad)):
            raise NumericError("non-finite gradient in x update")
        gg = float(np.vdot(grad, grad))
        if gg == 0.0:
            break
        d = -grad
        ad = np.where(mask, op.apply(d), 0.0)
        b_data = 2.0 * float(np.vdot(r, ad))
        a_data = float(np.vdot(ad, ad))
        dd = float(np.vdot(d, d))
        b_prox = rho * (4.0 * float(np.vdot(x, d)) - float(np.vdot(d, z_sum)))
        a_prox = 2.0 * rho * dd

        s = cfg.step_init
        accepted = False
        for _ in range(cfg.max_backtracks):
            delta = s * (b_data + b_prox) + s * s * (a_data + a_prox)
            if lam_tv > 0:
                tv_trial = lam_tv * _tv_value_arr(x + s * d, eps_tv)
                delta += tv_trial - tv_x
            else:
                tv_trial = 0.0
            if delta <= -_ARMIJO_C1 * s * gg:
                accepted = True
                break
            s *= cfg.step_shrink
        if not accepted:
            break
        x = x + s * d
        r = r + s * ad
        data += s * b_data + s * s * a_data
        tv_x = tv_trial
        f_cur += delta

    return x, r, f_start, f_cur, data


def x_update(state: AdmmState, t, geom: AcquisitionGeometry,
             motion: MotionTrajectory, cfg: ReconConfig,
             threads: int = 1) -> AdmmState:
    """Run the inner gradient descent; returns the state with x replaced."""
    _check_problem(state.x, t, geom, motion)
    op = ProjectionOperator(geom, motion, threads)
    ys = [v.data for v in state.y]
    us = [v.data for v in state.u]
    x_new, _, _, _, _ = _inner_descent(
        state.x.data, ys, us, _tensor(t), op.valid_mask, op, cfg)
    return replace(state, x=state.x.with_data(x_new))


def _y_arrays(x, us, cfg):
    shape = x.shape
    out = []
    for mode, u in zip(MODES, us):
        tau = cfg.lambda_rank * cfg.alpha[mode - 1] / cfg.rho
        out.append(fold(mode, shape, svt(unfold(x + u, mode), tau)))
    return out


def y_update(state: AdmmState, cfg: ReconConfig) -> AdmmState:
    """Shrink each mode unfolding of x + u_i: the trace-norm proximal step."""
    arrs = _y_arrays(state.x.data, [v.data for v in state.u], cfg)
    return replace(state, y=tuple(state.x.with_data(a) for a in arrs))


def u_update(state: AdmmState) -> AdmmState:
    """Dual ascent: u_i += x - y_i."""
    new_u = tuple(
        u.with_data(u.data + (state.x.data - y.data))
        for y, u in zip(state.y, state.u)
    )
    return replace(state, u=new_u)


def _pow2_scale(peak):
    """Smallest power of two >= peak (1.0 for peak == 0). Scaling by a
    power of two is exact in floating point, so normalization costs no
    precision on the way in or out."""
    if peak <= 0:
        return 1.0
    return float(2.0 ** np.ceil(np.log2(peak)))


def reconstruct(t: Volume4D, geom: AcquisitionGeometry,
                motion: MotionTrajectory, cfg: ReconConfig = None,
                threads: int = 1):
    """Solve for the motion-compensated HR series.

    The observation is scaled into [0, 1], x is initialized by per-volume
    linear interpolation of the motion-scattered samples, and the
    auxiliaries start at that initializer (duals at zero). Iterations stop
    once the relative change of x falls below cfg.epsilon or after
    cfg.max_outer_iters, whichever comes first.

    Returns
    -------
    x : Volume4D
        HR-grid reconstruction, back in input intensity units. If the
        tolerance was never reached, the best-objective iterate.
    report : ConvergenceReport
    """
    if cfg is None:
        cfg = ReconConfig()
    if t.shape[:3] != geom.lr_dims:
        raise ValueError(f"t dims {t.shape[:3]} do not match LR dims {geom.lr_dims}")
    if motion.n_timepoints != t.shape[3]:
        raise ValueError(
            f"motion has {motion.n_timepoints} timepoints, series has {t.shape[3]}"
        )

    op = ProjectionOperator(geom, motion, threads)
    mask = op.valid_mask
    scale = _pow2_scale(float(np.max(np.abs(np.where(mask, t.data, 0.0)), initial=0.0)))
    tn = np.asarray(t.data, dtype=np.float64) / scale
    denom = float(np.sqrt(np.vdot(np.where(mask, tn, 0.0),
                                  np.where(mask, tn, 0.0))))
    if denom == 0.0:
        denom = 1.0

    t_norm = t.with_data(tn)
    x0, covered = reconstruct_series_3d(t_norm, geom, motion, "linear", threads)
    x = x0.data

    # voxels left uncovered by the scattered resampling (large motion can
    # push every sample away from a grid region) start from the temporal
    # mean of their covered volumes instead of zero; holes shared by the
    # whole series stay zero
    n_cov = covered.sum(axis=3)
    have = n_cov > 0
    with np.errstate(invalid="ignore"):
        fill = np.where(have, x.sum(axis=3) / np.maximum(n_cov, 1), 0.0)
    hole = ~covered & have[..., None]
    if hole.any():
        x = np.where(hole, fill[..., None], x)

    ys = [x.copy() for _ in MODES]
    us = [np.zeros_like(x) for _ in MODES]

    cols = {name: [] for name in CONVERGENCE_COLUMNS[1:]}
    f_starts, f_ends = [], []
    best_obj = np.inf
    best_x = x
    converged = False
    iterations = 0

    for _ in range(cfg.max_outer_iters):
        x_prev = x
        x, r, f_start, f_end, data = _inner_descent(x, ys, us, tn, mask, op, cfg)
        if f_end > f_start:
            raise NumericError("x subproblem objective increased")
        ys = _y_arrays(x, us, cfg)
        us = [u + (x - y) for y, u in zip(ys, us)]
        iterations += 1

        rank_term = cfg.lambda_rank * rank_surrogate(x, cfg.alpha) \
            if cfg.lambda_rank > 0 else 0.0
        tv_term = cfg.lambda_tv * _tv_value_arr(x, cfg.tv_epsilon) \
            if cfg.lambda_tv > 0 else 0.0
        obj = data + rank_term + tv_term
        rel = float(np.linalg.norm((x - x_prev).ravel())) / denom
        xn = float(np.linalg.norm(x.ravel()))
        primal = max(
            float(np.linalg.norm((x - y).ravel())) for y in ys
        ) / xn if xn > 0 else 0.0

        cols["objective"].append(obj)
        cols["data_fidelity"].append(data)
        cols["rank_term"].append(rank_term)
        cols["tv_term"].append(tv_term)
        cols["rel_change"].append(rel)
        cols["primal_residual"].append(primal)
        f_starts.append(f_start)
        f_ends.append(f_end)

        if obj < best_obj:
            best_obj = obj
            best_x = x
        if rel < cfg.epsilon:
            converged = True
            break

    out = x if converged else best_x
    report = ConvergenceReport(
        iterations=iterations,
        converged=converged,
        objective=np.array(cols["objective"]),
        data_fidelity=np.array(cols["data_fidelity"]),
        rank_term=np.array(cols["rank_term"]),
        tv_term=np.array(cols["tv_term"]),
        rel_change=np.array(cols["rel_change"]),
        primal_residual=np.array(cols["primal_residual"]),
        x_objective_start=np.array(f_starts),
        x_objective_end=np.array(f_ends),
        scale=scale,
    )
    vol = Volume4D(out * scale, spacing=(*geom.hr_spacing, t.spacing[3]))
    return vol, report
