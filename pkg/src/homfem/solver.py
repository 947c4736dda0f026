"""The constructive solve pipeline.

Four stages: a Newton solve of the effective (non-oscillatory) semilinear
problem for u0, a smallest-singular-value estimate certifying that u0 is
non-degenerate, the one-linear-solve approximate solution
``ubar = -A_eps^{-1} D F(u0)``, and the frozen-operator fixed-point
iteration

    (A_eps + C(u0)) u_{l+1} = C(u0) u_l - D F(u_l),    u_1 = ubar,

where C(u0) couples trial values against test gradients through the flux
derivative at u0.  The frozen operator is factorized once and reused; each
step is algebraically the linearized update with the derivative taken at u0
rather than at the current iterate.  Starting at ubar matters: the first
correction from u0 does not shrink with the oscillation period, while the
one from ubar does.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field as dc_field

import numpy as np

from .coeff import HomogenizedTensor, TensorField
from .fem import (DiscreteField, FemSpace, LinearSolveError, SparseOperator,
                  assemble_diffusion, assemble_divergence_load,
                  assemble_jacobian_coupling, lu_factor, solve_linear)
from .nonlin import Nonlinearity, eval_F, eval_F_jacobian
from .norms import linf_norm, w1p_norm

__all__ = [
    "SolverConfig",
    "SolverReport",
    "UniquenessProbeReport",
    "newton_solve",
    "solve_homogenized",
    "nondegeneracy_margin",
    "approximate_solution",
    "fixed_point_solve",
    "local_uniqueness_probe",
]


@dataclass
class SolverConfig:
    """Tolerances and loop limits for the pipeline.

    ``delta`` is the uniqueness-ball radius used by the restart probe; when
    None it defaults to 0.1 * (1 + |u0|_inf) at probe time.  ``mesh_ratio``
    is the required oscillation resolution: h <= eps / mesh_ratio.
    """

    newton_tol: float = 1e-10
    newton_max_iter: int = 25
    fp_tol: float = 1e-9
    fp_max_iter: int = 50
    delta: float | None = None
    mesh_ratio: float = 8.0

    def __post_init__(self):
        if min(self.newton_tol, self.fp_tol) <= 0:
            raise ValueError("tolerances must be positive")
        if min(self.newton_max_iter, self.fp_max_iter) < 1:
            raise ValueError("iteration limits must be at least 1")


@dataclass
class SolverReport:
    """Iteration record of a Newton or fixed-point run."""

    status: str = "running"          # converged | max-iter | diverged
    iterations: int = 0
    residual_history: list = dc_field(default_factory=list)
    step_norms: list = dc_field(default_factory=list)
    linf_history: list = dc_field(default_factory=list)
    final_linf: float = np.nan
    final_w12: float = np.nan

    @property
    def contraction_factors(self) -> list:
        """Ratios of successive step norms (defined from the second step)."""
        s = self.step_norms
        return [s[k + 1] / s[k] for k in range(len(s) - 1) if s[k] > 0]

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "iterations": self.iterations,
            "residual_history": list(self.residual_history),
            "step_norms": list(self.step_norms),
            "contraction_factors": self.contraction_factors,
            "linf_history": list(self.linf_history),
            "final_linf": self.final_linf,
            "final_w12": self.final_w12,
        }


def _finalize(report: SolverReport, u: DiscreteField) -> None:
    report.final_linf = linf_norm(u)
    report.final_w12 = w1p_norm(u, 2.0)


def _diverging(history, window: int = 3) -> bool:
    if len(history) < window + 1:
        return False
    tail = history[-(window + 1):]
    return all(tail[k + 1] > tail[k] for k in range(window))


def residual_vector(space: FemSpace, diffusion: SparseOperator,
                    nl: Nonlinearity, u: DiscreteField) -> np.ndarray:
    """Free-dof residual of A u + D F(u) = 0 (Euclidean proxy for the dual norm)."""
    load = assemble_divergence_load(space, eval_F(nl, space, u))
    return diffusion.matrix @ u.free() + load.vector


def newton_solve(space: FemSpace, diffusion, nl: Nonlinearity,
                 cfg: SolverConfig | None = None,
                 start: DiscreteField | None = None):
    """Newton iteration on A u + D F(u) = 0 for a given diffusion operator.

    ``diffusion`` may be a TensorField, a HomogenizedTensor or an already
    assembled SparseOperator.  Each step solves
    ``(A + C(u_k)) s = -(A u_k + D F(u_k))``.  Linear problems (flux
    independent of u) converge in exactly one step.
    """
    cfg = cfg or SolverConfig()
    if isinstance(diffusion, HomogenizedTensor):
        diffusion = assemble_diffusion(space, diffusion.as_tensor_field())
    elif isinstance(diffusion, TensorField):
        diffusion = assemble_diffusion(space, diffusion)
    u = start.copy() if start is not None else space.zero_field()
    report = SolverReport()
    for _ in range(cfg.newton_max_iter):
        try:
            res = residual_vector(space, diffusion, nl, u)
            jac = assemble_jacobian_coupling(space,
                                             eval_F_jacobian(nl, space, u))
            step = solve_linear(diffusion + jac, -res)
        except (LinearSolveError, ValueError):
            if report.iterations == 0:
                raise
            report.status = "diverged"
            _finalize(report, u)
            return u, report
        u = u + step
        if not np.all(np.isfinite(u.values)):
            report.status = "diverged"
            _finalize(report, u)
            return u, report
        report.iterations += 1
        try:
            res_norm = float(np.linalg.norm(
                residual_vector(space, diffusion, nl, u)))
        except ValueError:
            report.status = "diverged"
            _finalize(report, u)
            return u, report
        report.residual_history.append(res_norm)
        report.step_norms.append(w1p_norm(step, 2.0))
        report.linf_history.append(linf_norm(u))
        if res_norm <= cfg.newton_tol:
            report.status = "converged"
            _finalize(report, u)
            return u, report
        if _diverging(report.residual_history):
            report.status = "diverged"
            _finalize(report, u)
            return u, report
    report.status = "max-iter"
    _finalize(report, u)
    return u, report


def solve_homogenized(space: FemSpace, ahat: HomogenizedTensor,
                      nl: Nonlinearity, cfg: SolverConfig | None = None):
    """Newton solve of the effective problem Ahat u + D F(u) = 0."""
    return newton_solve(space, ahat, nl, cfg)


def nondegeneracy_margin(space: FemSpace, ahat: HomogenizedTensor,
                         nl: Nonlinearity, u0: DiscreteField,
                         max_iter: int = 30, rtol: float = 1e-8) -> float:
    """Smallest singular value of the linearized effective operator.

    Estimated by inverse power iteration on the normal equations of
    ``Ahat + C(u0)`` over the free dofs, then normalized by the cell measure
    so estimates are comparable across mesh resolutions.  Returns 0.0 when
    the operator cannot be factorized (discretely degenerate).
    """
    A = assemble_diffusion(space, ahat.as_tensor_field())
    C = assemble_jacobian_coupling(space, eval_F_jacobian(nl, space, u0))
    M = (A + C).matrix
    try:
        lu = lu_factor(M)
    except LinearSolveError:
        return 0.0
    rng = np.random.default_rng(0)
    x = rng.standard_normal(space.num_free)
    x /= np.linalg.norm(x)
    sigma = np.inf
    for _ in range(max_iter):
        y = lu.solve(lu.solve(x, trans="T"), trans="N")
        lam = np.linalg.norm(y)
        if lam == 0 or not np.isfinite(lam):
            return 0.0
        new_sigma = 1.0 / np.sqrt(lam)
        x = y / lam
        if np.isfinite(sigma) and abs(new_sigma - sigma) <= rtol * sigma:
            sigma = new_sigma
            break
        sigma = new_sigma
    cell_measure = float(space.mesh.cell_measures.mean())
    return float(sigma) / cell_measure


def _check_resolution(space: FemSpace, tensor_eps: TensorField,
                      cfg: SolverConfig) -> None:
    eps = tensor_eps.epsilon
    if eps is None:
        return
    if space.mesh.spacing > eps / cfg.mesh_ratio * (1 + 1e-12):
        warnings.warn(
            f"mesh spacing h={space.mesh.spacing:.4g} does not resolve the "
            f"oscillation: need h <= eps/{cfg.mesh_ratio:g} = "
            f"{eps / cfg.mesh_ratio:.4g}", stacklevel=3)


def approximate_solution(space: FemSpace, tensor_eps: TensorField,
                         nl: Nonlinearity, u0: DiscreteField,
                         cfg: SolverConfig | None = None) -> DiscreteField:
    """One linear solve: A_eps ubar + D F(u0) = 0.

    The cheap oscillation-aware starting element: it carries the fine-scale
    structure of the coefficient while borrowing the flux from u0.
    """
    cfg = cfg or SolverConfig()
    _check_resolution(space, tensor_eps, cfg)
    A_eps = assemble_diffusion(space, tensor_eps)
    load = assemble_divergence_load(space, eval_F(nl, space, u0))
    return solve_linear(A_eps, -load)


def fixed_point_solve(space: FemSpace, tensor_eps: TensorField,
                      nl: Nonlinearity, u0: DiscreteField,
                      cfg: SolverConfig | None = None,
                      start: DiscreteField | None = None):
    """Frozen-operator fixed-point iteration for the oscillatory problem.

    Requires a non-degenerate u0 (positive margin, checked by the caller)
    and a mesh resolving the oscillation.  Starts at the approximate
    solution unless ``start`` is given.  Divergence (step norms growing over
    three consecutive iterations) usually signals that the oscillation
    period is too large for the frozen linearization to contract.
    """
    cfg = cfg or SolverConfig()
    _check_resolution(space, tensor_eps, cfg)
    A_eps = assemble_diffusion(space, tensor_eps)
    C = assemble_jacobian_coupling(space, eval_F_jacobian(nl, space, u0))
    frozen = lu_factor(A_eps + C)

    u = start.copy() if start is not None else approximate_solution(
        space, tensor_eps, nl, u0, cfg)
    report = SolverReport()
    for _ in range(cfg.fp_max_iter):
        try:
            rhs = C.matrix @ u.free() - assemble_divergence_load(
                space, eval_F(nl, space, u)).vector
            u_next = space.field_from_free(frozen.solve(rhs))
            finite = np.all(np.isfinite(u_next.values))
            res_norm = (float(np.linalg.norm(
                residual_vector(space, A_eps, nl, u_next)))
                if finite else np.inf)
        except ValueError:
            # overflow of the flux along a running iterate is divergence; a
            # failure on the very first evaluation is a usage error
            if report.iterations == 0:
                raise
            report.status = "diverged"
            _finalize(report, u)
            return u, report
        if not finite:
            report.status = "diverged"
            _finalize(report, u)
            return u, report
        step_norm = w1p_norm(u_next - u, 2.0)
        u = u_next
        report.iterations += 1
        report.step_norms.append(step_norm)
        report.linf_history.append(linf_norm(u))
        report.residual_history.append(res_norm)
        if step_norm <= cfg.fp_tol:
            report.status = "converged"
            _finalize(report, u)
            return u, report
        if _diverging(report.step_norms):
            report.status = "diverged"
            _finalize(report, u)
            return u, report
    report.status = "max-iter"
    _finalize(report, u)
    return u, report


@dataclass
class UniquenessProbeReport:
    """Outcome of seeded perturbed restarts of the fixed-point iteration."""

    magnitude: float
    delta: float
    outside_ball: bool
    distances: list = dc_field(default_factory=list)
    statuses: list = dc_field(default_factory=list)

    @property
    def all_same(self) -> bool:
        return bool(self.distances) and all(
            s == "converged" for s in self.statuses) and all(
            d <= self.tolerance for d in self.distances)

    tolerance: float = np.nan


def local_uniqueness_probe(space: FemSpace, tensor_eps: TensorField,
                           nl: Nonlinearity, u0: DiscreteField,
                           cfg: SolverConfig | None = None, trials: int = 10,
                           seed: int = 0, magnitude: float | None = None,
                           u_eps: DiscreteField | None = None) -> UniquenessProbeReport:
    """Restart the iteration from randomly perturbed starting elements.

    Perturbations are nodal fields of max-norm ``magnitude`` (default: half
    the uniqueness radius delta) added to the approximate solution.  The
    report records, per trial, the max-norm distance of the recomputed
    solution from the reference one; runs agree when every distance is below
    ten times the fixed-point tolerance.  Magnitudes beyond delta are
    allowed but flagged as outside the uniqueness ball, and only recorded.
    """
    cfg = cfg or SolverConfig()
    if u_eps is None:
        u_eps, ref_report = fixed_point_solve(space, tensor_eps, nl, u0, cfg)
        if ref_report.status != "converged":
            raise RuntimeError("reference fixed-point run did not converge")
    delta = cfg.delta if cfg.delta is not None else 0.1 * (1.0 + linf_norm(u0))
    if magnitude is None:
        magnitude = 0.5 * delta
    ubar = approximate_solution(space, tensor_eps, nl, u0, cfg)
    rng = np.random.default_rng(seed)
    report = UniquenessProbeReport(magnitude=magnitude, delta=delta,
                                   outside_ball=magnitude > delta,
                                   tolerance=10.0 * cfg.fp_tol)
    for _ in range(trials):
        noise = rng.uniform(-1.0, 1.0, size=space.num_free)
        pert = space.field_from_free(noise)
        scale = linf_norm(pert)
        if scale > 0:
            pert = pert * (magnitude / scale)
        u_trial, trial_report = fixed_point_solve(
            space, tensor_eps, nl, u0, cfg, start=ubar + pert)
        report.statuses.append(trial_report.status)
        report.distances.append(linf_norm(u_trial - u_eps))
    return report
