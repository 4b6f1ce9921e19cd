"""Estimator-style wrappers around the library functions.

Hyperparameters go to ``__init__``; ``fit`` takes the channel data and
stores results in trailing-underscore attributes.  ``get_params`` and
``set_params`` come from scikit-learn's ``BaseEstimator``.
"""

from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .algorithm import (
    RobustInputs,
    fixed_beam_worst_snr,
    non_robust_baseline,
    run_algorithm1,
)
from .bound import csi_error_bound, monte_carlo_bound
from .geometry import ArrayGeometry, ChannelParams, PathLossParams
from .robust import PhaseSet

DEFAULT_P_T = 10 ** (27 / 10) * 1e-3
DEFAULT_SIGMA2 = 10 ** (-80 / 10) * 1e-3


class RobustBeamformer(BaseEstimator):
    """Worst-case robust joint design of RIS phases and transmit beam.

    Parameters
    ----------
    eps_dh : radius of the RIS-UE channel error ball.
    phase_set : ``PhaseSet`` or None for the full circle.
    solver : ``"sdr"`` or ``"bnb"``.
    """

    def __init__(
        self,
        eps_dh=0.0,
        beta=1.0,
        phase_set=None,
        solver="sdr",
        P_T=DEFAULT_P_T,
        sigma_n2=DEFAULT_SIGMA2,
        delta_bu=0.0,
        eps_R=1e-4,
        tol_bnb=2e-4,
        max_nodes=1000,
        T=50,
        init="zero",
        random_state=0,
    ):
        self.eps_dh = eps_dh
        self.beta = beta
        self.phase_set = phase_set
        self.solver = solver
        self.P_T = P_T
        self.sigma_n2 = sigma_n2
        self.delta_bu = delta_bu
        self.eps_R = eps_R
        self.tol_bnb = tol_bnb
        self.max_nodes = max_nodes
        self.T = T
        self.init = init
        self.random_state = random_state

    def _inputs(self, H_br, h_ru_hat):
        return RobustInputs(
            H_br,
            h_ru_hat,
            self.eps_dh,
            beta=self.beta,
            phase_set=self.phase_set if self.phase_set is not None else PhaseSet.full(),
            P_T=self.P_T,
            sigma_n2=self.sigma_n2,
            delta_bu=self.delta_bu,
            eps_R=self.eps_R,
            tol_bnb=self.tol_bnb,
            max_nodes=self.max_nodes,
            T=self.T,
        )

    def fit(self, H_br, h_ru_hat):
        inputs = self._inputs(H_br, h_ru_hat)
        res = run_algorithm1(inputs, self.solver, init=self.init, seed=self.random_state)
        self.result_ = res
        self.theta_ = res.theta_opt.theta
        self.w_ = res.w_opt
        self.mu_ = res.mu_opt
        self.worst_case_snr_ = res.worst_case_snr
        self.n_iter_ = len(res.iterations)
        self.inputs_ = inputs
        return self

    def score(self, H_br=None, h_ru_hat=None):
        """Exact worst-case SNR of the fitted design on a (possibly new) estimate."""
        check_is_fitted(self, "theta_")
        H = self.inputs_.H_br if H_br is None else H_br
        h = self.inputs_.h_ru_hat if h_ru_hat is None else h_ru_hat
        return fixed_beam_worst_snr(self.theta_, self.w_, H, h, self.eps_dh, self.delta_bu, self.P_T, self.sigma_n2)


class NonRobustBeamformer(RobustBeamformer):
    """Design on the estimated channel only (the error ball is ignored)."""

    def fit(self, H_br, h_ru_hat):
        inputs = self._inputs(H_br, h_ru_hat)
        res = non_robust_baseline(inputs, seed=self.random_state)
        self.result_ = res
        self.theta_ = res.theta.theta
        self.w_ = res.w
        self.nominal_snr_ = res.nominal_snr
        self.worst_case_snr_ = res.worst_case_snr
        self.inputs_ = inputs
        return self


class CSIErrorBound(BaseEstimator):
    """Channel-error radius implied by a location-error radius.

    ``fit(p_hat)`` computes the theoretical bound at the estimated user
    position; with ``mc_trials > 0`` a Monte Carlo estimate of the actual
    largest error is stored as well.
    """

    def __init__(
        self,
        eps_dp=0.3,
        geometry=None,
        channel=None,
        path_loss=None,
        mc_trials=0,
        random_state=0,
    ):
        self.eps_dp = eps_dp
        self.geometry = geometry
        self.channel = channel
        self.path_loss = path_loss
        self.mc_trials = mc_trials
        self.random_state = random_state

    def fit(self, p_hat):
        geom = self.geometry if self.geometry is not None else ArrayGeometry.reference()
        params = self.channel if self.channel is not None else ChannelParams.from_carrier(60e9)
        pl = self.path_loss if self.path_loss is not None else PathLossParams()
        res = csi_error_bound(geom, params, pl, p_hat, self.eps_dp)
        if self.mc_trials > 0:
            res.mc_actual = monte_carlo_bound(geom, params, pl, p_hat, self.eps_dp, trials=self.mc_trials, seed=self.random_state)
        self.result_ = res
        self.eps_dh_ = res.eps_total
        self.eps_ru_los_ = res.eps_ru_los
        self.omega_ = res.omega_upp_max
        self.mc_actual_ = res.mc_actual
        return self

