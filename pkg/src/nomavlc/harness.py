"""Deterministic Monte Carlo engine for BER and sum-rate experiments.

Every random draw descends from the configured master seed through a
documented counter scheme: SeedSequence([master, level_index, variant
code, snr_millidB + 10^6, stage, shard]). Channels are keyed by the
estimation-error level only, so all variants and SNR points of one sweep
share the same channel realization; training, the Bussgang probe and
each measurement shard own independent streams.

Per point the chain is: build channels -> perturb -> per-user SVD
precoders with the exponent plan -> QoS power allocation -> pre-distorter
training on the leading fraction of the stream -> frozen steady-state
transmission through bias, LED, channel and AWGN -> equalize -> SIC ->
bit error counting with Wilson intervals, next to the analytic bound.

Each user's leg applies that user's own precoder to the common
superposed stream; under the similar-channel premise the legs coincide
with a single broadcast, and per-user effective channels stay exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import analysis, device, noma, precoding
from .config import SimConfig, resolve_sigma_level
from .geometry import ChannelSet, build_channel_matrix
from .noma import Constellation, UserPlan

VARIANT_CODE = {"proposed": 0, "grpa": 1, "zf": 2, "linear-ideal": 3}

CSV_HEADER = "snr_db,variant,user,sigma_gamma2,ber,ber_ci_lo,ber_ci_hi,ber_analytic,sinr,rate"
SUM_RATE_HEADER = "users,variant,sum_rate_bpcu,feasible"


def _fmt(x: float) -> str:
    return f"{x:.10g}"


def _rng(master: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([master, *key]))


def _snr_code(snr_db: float) -> int:
    return int(round(snr_db * 1000.0)) + 1_000_000


def wilson_interval(errors: int, trials: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """95% Wilson score interval for a binomial proportion."""
    if trials <= 0:
        return 0.0, 1.0
    p = errors / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1.0 - p) / trials + z * z / (4.0 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


@dataclass
class Link:
    """Channels, precoders and equalizers shared by one sweep point."""

    channels: ChannelSet
    stream_dim: int
    exponents: list[float]
    precoders: list[precoding.Precoder]  # already scaled to the LED drive range
    offset: float
    equalizers: list[np.ndarray]
    dc_terms: list[np.ndarray]
    sigma_gamma2: float


@dataclass
class PointRow:
    snr_db: float
    variant: str
    user: int
    sigma_gamma2: float
    ber: float
    ber_ci_lo: float
    ber_ci_hi: float
    ber_analytic: float
    sinr: float
    rate: float

    def csv(self) -> str:
        return ",".join(
            [
                _fmt(self.snr_db),
                self.variant,
                str(self.user),
                _fmt(self.sigma_gamma2),
                _fmt(self.ber),
                _fmt(self.ber_ci_lo),
                _fmt(self.ber_ci_hi),
                _fmt(self.ber_analytic),
                _fmt(self.sinr),
                _fmt(self.rate),
            ]
        )


@dataclass
class PointResult:
    rows: list[PointRow]
    notices: list[str] = field(default_factory=list)
    alpha: float = 1.0
    sigma_o2: dict[int, float] = field(default_factory=dict)
    powers: dict[int, float] = field(default_factory=dict)


def _qos_order(rates: list[float]) -> list[int]:
    """User indices sorted by ascending QoS rate (exponent-plan order)."""
    return sorted(range(len(rates)), key=lambda i: (rates[i], i))


def build_link(cfg: SimConfig, variant: str, level: float | str, rng: np.random.Generator) -> Link:
    """Channels, exponent plan and drive-scaled precoders for one sweep point."""
    room = cfg.geometry.room()
    users = [cfg.geometry.user(i) for i in range(cfg.num_users)]
    true = [build_channel_matrix(room, u) for u in users]
    sigma_gamma2 = resolve_sigma_level(level, true)
    channels = ChannelSet.build(room, users, sigma_gamma2, rng)
    d = min(svd.rank for svd in channels.true_svd)
    if d < 1:
        raise ValueError("all-zero channel; no line of sight inside the field of view")

    rates = cfg.qos_rates[: cfg.num_users]
    order = _qos_order(rates)
    strengths = [channels.est_svd[i].strength() for i in order]
    plan = precoding.assign_lambdas(strengths, cfg.lambda1)
    exponents = [0.0] * cfg.num_users
    for pos, user in enumerate(order):
        exponents[user] = plan.exponents[pos]

    if variant == "zf":
        raws = [precoding.zf_precoder(channels.estimated[u], rank=d) for u in range(cfg.num_users)]
    else:
        raws = [
            precoding.svd_precoder(channels.est_svd[u], exponents[u], rank=d)
            for u in range(cfg.num_users)
        ]
    max_bias = max(p.bias for p in raws)
    gain = cfg.drive_level * cfg.i_max / (2.0 * max_bias)
    precoders = [p.scaled(gain) for p in raws]
    offset = gain * max_bias  # = drive_level * i_max / 2, both rails end in [0, drive]

    m_t = len(cfg.geometry.led_positions)
    ones = np.ones(m_t)
    equalizers, dc_terms = [], []
    for u in range(cfg.num_users):
        Hest = channels.estimated[u]
        E = np.linalg.pinv(Hest @ precoders[u].matrix)
        # Receiver-side gain control: normalize each support row so the
        # estimated end-to-end gain is exactly one (uses estimated CSI only;
        # keeps SIC cancellation scale-true for projector-like baselines).
        G = E @ Hest @ precoders[u].matrix
        for i in range(d):
            if abs(G[i, i]) > 1e-12:
                E[i, :] /= G[i, i]
        dc = E @ (Hest @ (offset * ones))
        equalizers.append(E)
        dc_terms.append(dc * (1.0 + 1.0j))
    return Link(
        channels=channels,
        stream_dim=d,
        exponents=exponents,
        precoders=precoders,
        offset=offset,
        equalizers=equalizers,
        dc_terms=dc_terms,
        sigma_gamma2=sigma_gamma2,
    )


def reference_rx_power(link: Link, cfg: SimConfig) -> float:
    """Mean per-branch received power for a unit power budget, bias included."""
    d = link.stream_dim
    total = 0.0
    for u in range(cfg.num_users):
        HP = link.channels.true[u] @ link.precoders[u].matrix
        sig = float(np.sum(HP[:, :d] ** 2))  # unit budget spread over support columns
        dc = 2.0 * link.offset**2 * float(np.sum((link.channels.true[u] @ np.ones(HP.shape[1])) ** 2))
        total += (sig + dc) / link.channels.true[u].shape[0]
    return total / cfg.num_users


def sigma_v2_for_snr(link: Link, cfg: SimConfig, snr_db: float) -> float:
    return reference_rx_power(link, cfg) / 10.0 ** (snr_db / 10.0)


def _budgets(link: Link, cfg: SimConfig, variant: str, sigma_v2: float) -> list[float]:
    eta = 0.0 if variant == "linear-ideal" else cfg.eta
    out = []
    for u in range(cfg.num_users):
        b = noma.noise_budget(
            link.channels.estimated[u],
            link.precoders[u].matrix,
            eta,
            sigma_v2,
            alpha=1.0,
            rank=link.stream_dim,
        )
        out.append(b.sigma_o2)
    return out


def _allocate(cfg: SimConfig, variant: str, link: Link, sigma_o2s: list[float]) -> noma.AllocationResult:
    rates = cfg.qos_rates[: cfg.num_users]
    if variant == "grpa":
        order = sorted(range(cfg.num_users), key=lambda u: (link.channels.est_svd[u].strength(), u))
        powers_sorted = noma.grpa_allocate([link.channels.est_svd[u].strength() for u in order])
        powers = [0.0] * cfg.num_users
        for pos, u in enumerate(order):
            powers[u] = powers_sorted[pos]
        plans = [
            UserPlan(
                user=u,
                rate=rates[u],
                epsilon=2.0 ** rates[u] - 1.0,
                power=powers[u],
                layer=-1,
                exponent=link.exponents[u],
                sigma_o2=sigma_o2s[u],
            )
            for u in range(cfg.num_users)
        ]
        order_by_power = sorted(range(len(plans)), key=lambda i: (-plans[i].power, plans[i].user))
        for layer, i in enumerate(order_by_power):
            plans[i].layer = layer
        return noma.AllocationResult(plans=plans, rejected=[])
    return noma.allocate_power(rates, sigma_o2s, exponents=link.exponents)


def _generate_tx(
    plans: list[UserPlan], constellation: Constellation, n: int, d: int, rng: np.random.Generator
) -> tuple[dict[int, np.ndarray], np.ndarray]:
    """Random bits per admitted user and the superposed (n, d) stream."""
    bits, streams, powers = {}, [], []
    bps = constellation.bits_per_symbol
    for plan in plans:
        b = rng.integers(0, 2, size=n * d * bps, dtype=np.uint8)
        bits[plan.user] = b
        streams.append(noma.qam_modulate(b, constellation).reshape(n, d))
        powers.append(plan.power)
    return bits, noma.superpose(streams, powers)


def _pad_stream(x: np.ndarray, m_t: int) -> np.ndarray:
    n, d = x.shape
    if d == m_t:
        return x
    out = np.zeros((n, m_t), dtype=complex)
    out[:, :d] = x
    return out


def _transmit_leg(
    x_full: np.ndarray,
    link: Link,
    user: int,
    cfg: SimConfig,
    variant: str,
    state: device.PredistorterState | None,
    sigma_v2: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """One user's leg: precode+bias, pre-distort, LED, channel, AWGN, equalize."""
    led = device.LedModel(i_max=cfg.i_max, p=cfg.rapp_p)
    xp = x_full @ link.precoders[user].matrix.T + link.offset * (1.0 + 1.0j)
    if variant == "linear-ideal":
        tx = xp
    else:
        pred = device.chebyshev_eval(state.coeffs, xp)
        tx = device.led_apply(pred, led)
    H = link.channels.true[user]
    noise_scale = math.sqrt(sigma_v2 / 2.0)
    y = tx @ H.T + noise_scale * (
        rng.standard_normal((x_full.shape[0], H.shape[0]))
        + 1j * rng.standard_normal((x_full.shape[0], H.shape[0]))
    )
    return y @ link.equalizers[user].T - link.dc_terms[user]


def _train(
    link: Link,
    cfg: SimConfig,
    plans: list[UserPlan],
    constellation: Constellation,
    sigma_v2: float,
    rng: np.random.Generator,
    n_train: int,
) -> tuple[device.PredistorterState, np.ndarray]:
    """Closed-loop training fed back from the best-QoS user's equalized leg.

    The training prefix is revisited for cfg.train_epochs passes; the tiny
    NLMS step size needs ~1e5 updates to pull the expansion from its
    feasible initializer to the device inverse.
    """
    best = max(plans, key=lambda p: (p.rate, -p.user)).user
    d = link.stream_dim
    _, x = _generate_tx(plans, constellation, n_train, d, rng)
    x_full = _pad_stream(x, link.precoders[best].matrix.shape[0])
    xp = x_full @ link.precoders[best].matrix.T + link.offset * (1.0 + 1.0j)
    if cfg.train_epochs > 1:
        xp = np.tile(xp, (cfg.train_epochs, 1))

    led = device.LedModel(i_max=cfg.i_max, p=cfg.rapp_p)
    H = link.channels.true[best]
    E = link.equalizers[best]
    P = link.precoders[best].matrix
    dc = link.dc_terms[best]
    noise_scale = math.sqrt(sigma_v2 / 2.0)

    def plant(pred: np.ndarray) -> np.ndarray:
        batch = np.atleast_2d(pred)
        y = device.led_apply(batch, led) @ H.T
        y = y + noise_scale * (rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape))
        lhat = y @ E.T - dc
        # map the equalized estimate back to the pre-distorter's input domain
        back = lhat @ P.T + link.offset * (1.0 + 1.0j)
        return back.reshape(np.shape(pred))

    state = device.PredistorterState(coeffs=None, eta=cfg.eta, beta=cfg.beta)
    return device.train_predistorter(plant, xp, state, rng=rng, n_cheb=cfg.n_cheb)


def run_point(
    cfg: SimConfig,
    snr_db: float,
    variant: str,
    level: float | str,
    level_index: int,
    trained_state: device.PredistorterState | None = None,
) -> PointResult:
    """Simulate one (SNR, variant, estimation-error) operating point.

    trained_state reuses pre-distorter weights trained elsewhere on the
    same link (the sweep trains once per variant and error level at the
    top SNR); by default the point trains its own.
    """
    if variant not in VARIANT_CODE:
        raise ValueError(f"unknown variant {variant!r}")
    vc = VARIANT_CODE[variant]
    sc = _snr_code(snr_db)
    link = build_link(cfg, variant, level, _rng(cfg.master_seed, level_index, 0, 0, 0))
    sigma_v2 = sigma_v2_for_snr(link, cfg, snr_db)
    sigma_o2s = _budgets(link, cfg, variant, sigma_v2)
    alloc = _allocate(cfg, variant, link, sigma_o2s)
    notices = [f"user {u} rejected: power budget exceeded" for u in alloc.rejected]
    if not alloc.plans:
        return PointResult(rows=[], notices=["point skipped: no admissible user"] + notices)

    constellation = Constellation(cfg.modulation)
    d = link.stream_dim
    n_train = int(cfg.train_fraction * cfg.symbols_per_point)
    n_meas = cfg.symbols_per_point - n_train

    state = trained_state
    if variant != "linear-ideal" and state is None:
        state, _ = _train(
            link, cfg, alloc.plans, constellation, sigma_v2,
            _rng(cfg.master_seed, level_index, vc, sc, 1), n_train,
        )

    # Bussgang statistics of the frozen composite device on a held-out stream
    if variant == "linear-ideal":
        alpha = 1.0
    else:
        best = max(alloc.plans, key=lambda p: (p.rate, -p.user)).user
        rngb = _rng(cfg.master_seed, level_index, vc, sc, 2)
        _, xb = _generate_tx(alloc.plans, constellation, min(20_000, n_meas), d, rngb)
        xbp = _pad_stream(xb, link.precoders[best].matrix.shape[0])
        xbp = xbp @ link.precoders[best].matrix.T + link.offset * (1.0 + 1.0j)
        led = device.LedModel(i_max=cfg.i_max, p=cfg.rapp_p)
        yb = device.led_apply(device.chebyshev_eval(state.coeffs, xbp), led)
        alpha = device.estimate_bussgang(xbp.ravel(), yb.ravel()).alpha

    bps = constellation.bits_per_symbol
    errors = {p.user: 0 for p in alloc.plans}
    base, rem = divmod(n_meas, cfg.shards)
    for shard in range(cfg.shards):
        n_i = base + (1 if shard < rem else 0)
        if n_i == 0:
            continue
        rng = _rng(cfg.master_seed, level_index, vc, sc, 3, shard)
        tx_bits, x = _generate_tx(alloc.plans, constellation, n_i, d, rng)
        x_full = _pad_stream(x, link.precoders[0].matrix.shape[0])
        for plan in alloc.plans:
            lhat = _transmit_leg(x_full, link, plan.user, cfg, variant, state, sigma_v2, rng)
            detected = noma.sic_detect(lhat[:, :d], alloc.plans, constellation)
            errors[plan.user] += int(np.sum(detected[plan.user] != tx_bits[plan.user]))

    total_bits = n_meas * d * bps
    mean_x_power = d * sum(p.power for p in alloc.plans)
    sic_powers = [p.power for p in sorted(alloc.plans, key=lambda q: q.layer)]
    ladder = analysis.mu_ladder(constellation, sic_powers)

    rows = []
    for plan in sorted(alloc.plans, key=lambda p: p.user):
        svd = link.channels.true_svd[plan.user]
        so_prime = analysis.sigma_o_prime(
            plan.sigma_o2, link.sigma_gamma2, plan.exponent, svd.s, svd.s, d, mean_x_power
        )
        p_m = analysis.ber_qam(analysis.ber_sqrt_m(ladder, so_prime))
        interference = sum(q.power for q in alloc.plans if q.layer > plan.layer)
        gamma = plan.power / (interference + so_prime)
        lo, hi = wilson_interval(errors[plan.user], total_bits)
        rows.append(
            PointRow(
                snr_db=snr_db,
                variant=variant,
                user=plan.user,
                sigma_gamma2=link.sigma_gamma2,
                ber=errors[plan.user] / total_bits,
                ber_ci_lo=lo,
                ber_ci_hi=hi,
                ber_analytic=p_m,
                sinr=gamma,
                rate=math.log2(1.0 + gamma),
            )
        )
    return PointResult(
        rows=rows,
        notices=notices,
        alpha=alpha,
        sigma_o2={p.user: p.sigma_o2 for p in alloc.plans},
        powers={p.user: p.power for p in alloc.plans},
    )


@dataclass
class SweepOutput:
    csv: str
    notices: list[str]
    name: str
    svg: str | None = None


def _train_for_sweep(
    cfg: SimConfig, variant: str, level: float | str, level_index: int
) -> device.PredistorterState | None:
    """Train once per (variant, error level) at the top of the SNR grid.

    The learned weights invert the device, which does not change with the
    operating SNR; retraining per point only adds curve variance.
    """
    if variant == "linear-ideal":
        return None
    snr_db = cfg.snr_grid_db[-1]
    vc, sc = VARIANT_CODE[variant], _snr_code(snr_db)
    link = build_link(cfg, variant, level, _rng(cfg.master_seed, level_index, 0, 0, 0))
    sigma_v2 = sigma_v2_for_snr(link, cfg, snr_db)
    alloc = _allocate(cfg, variant, link, _budgets(link, cfg, variant, sigma_v2))
    if not alloc.plans:
        return None
    n_train = int(cfg.train_fraction * cfg.symbols_per_point)
    state, _ = _train(
        link, cfg, alloc.plans, Constellation(cfg.modulation), sigma_v2,
        _rng(cfg.master_seed, level_index, vc, sc, 1), n_train,
    )
    return state


def sweep(cfg: SimConfig) -> SweepOutput:
    """BER-vs-SNR sweep over the grid x variants x estimation-error levels."""
    lines = [CSV_HEADER]
    notices: list[str] = []
    series: dict[tuple[str, float, int], list[tuple[float, float]]] = {}
    for level_index, level in enumerate(cfg.sigma_gamma2_levels):
        for variant in cfg.variants:
            try:
                trained = _train_for_sweep(cfg, variant, level, level_index)
            except Exception as exc:
                notices.append(f"training ({variant}, level={level}) failed: {exc}")
                continue
            for snr in cfg.snr_grid_db:
                try:
                    res = run_point(cfg, snr, variant, level, level_index, trained_state=trained)
                except Exception as exc:
                    notices.append(f"point (snr={snr}, {variant}, level={level}) failed: {exc}")
                    continue
                for n in res.notices:
                    notices.append(f"point (snr={snr}, {variant}, level={level}): {n}")
                for row in res.rows:
                    lines.append(row.csv())
                    series.setdefault((variant, row.sigma_gamma2, row.user), []).append(
                        (snr, row.ber)
                    )
    name = f"ber_m{cfg.modulation}_u{cfg.num_users}"
    csv = "\n".join(lines) + "\n"
    svg = _svg_ber_plot(series, name) if cfg.emit_svg else None
    return SweepOutput(csv=csv, notices=notices, name=name, svg=svg)


def gated_layer_rates(plans: list[UserPlan]) -> dict[int, float]:
    """Per-user delivered rate with SIC decodability gating.

    The decode schedule is the admission (user-index) order: interference
    on user u comes from every later-admitted user. Under the QoS
    allocation this coincides with descending power; a QoS-blind power
    rule can hand a late-decoded user more power than an earlier one, and
    then the earlier layers become undecodable. An undecodable layer
    (SINR below its own QoS rate) delivers zero and its power stays as
    residual interference for everyone after it.
    """
    ordered = sorted(plans, key=lambda p: p.user)
    residual = 0.0
    out: dict[int, float] = {}
    for i, plan in enumerate(ordered):
        later = sum(p.power for p in ordered[i + 1 :])
        denom = later + residual + plan.sigma_o2
        gamma = plan.power / denom if denom > 0 else float("inf")
        rate = math.log2(1.0 + gamma)
        if rate >= plan.rate:
            out[plan.user] = rate
        else:
            out[plan.user] = 0.0
            residual += plan.power
    return out


def sum_rate_experiment(cfg: SimConfig) -> SweepOutput:
    """Sum rate against user count for the QoS allocation and the gain-ratio baseline."""
    max_users = min(len(cfg.qos_rates), len(cfg.geometry.user_pd_positions))
    lines = [SUM_RATE_HEADER]
    notices: list[str] = []
    for variant in ("proposed", "grpa"):
        for n_users in range(1, max_users + 1):
            sub = cfg.model_copy(update={"num_users": n_users, "variants": [variant]})
            link = build_link(sub, "proposed" if variant == "grpa" else variant, 0.0, _rng(cfg.master_seed, 0, 0, 0, 0))
            sigma_v2 = sigma_v2_for_snr(link, sub, cfg.sum_rate_snr_db)
            sigma_o2s = _budgets(link, sub, variant, sigma_v2)
            alloc = _allocate(sub, variant, link, sigma_o2s)
            feasible = not alloc.rejected
            if alloc.rejected:
                notices.append(
                    f"{variant} U={n_users}: user(s) {alloc.rejected} rejected (budget exceeded)"
                )
            total = sum(gated_layer_rates(alloc.plans).values()) if alloc.plans else 0.0
            lines.append(f"{n_users},{variant},{_fmt(total)},{'true' if feasible else 'false'}")
    return SweepOutput(csv="\n".join(lines) + "\n", notices=notices, name=f"sum_rate_m{cfg.modulation}")


def train_report(cfg: SimConfig) -> tuple[SweepOutput, device.PredistorterState, str]:
    """Train the pre-distorter once and emit its weights plus the MSE trace.

    Uses the first configured estimation-error level, the top of the SNR
    grid and the first trainable variant.
    """
    variant = next((v for v in cfg.variants if v != "linear-ideal"), "proposed")
    level = cfg.sigma_gamma2_levels[0]
    snr_db = cfg.snr_grid_db[-1]
    vc, sc = VARIANT_CODE[variant], _snr_code(snr_db)
    link = build_link(cfg, variant, level, _rng(cfg.master_seed, 0, 0, 0, 0))
    sigma_v2 = sigma_v2_for_snr(link, cfg, snr_db)
    alloc = _allocate(cfg, variant, link, _budgets(link, cfg, variant, sigma_v2))
    if not alloc.plans:
        raise ValueError("no admissible user; nothing to train against")
    n_train = int(cfg.train_fraction * cfg.symbols_per_point)
    state, trace = _train(
        link, cfg, alloc.plans, Constellation(cfg.modulation), sigma_v2,
        _rng(cfg.master_seed, 0, vc, sc, 1), n_train,
    )
    trace_lines = ["window,smoothed_mse"] + [
        f"{i + 1},{_fmt(v)}" for i, v in enumerate(trace)
    ]
    out = SweepOutput(
        csv=device.coeffs_csv(state),
        notices=[f"trained {variant} at {snr_db} dB, level={level}"],
        name="predistorter_coeffs",
    )
    return out, state, "\n".join(trace_lines) + "\n"


def _svg_ber_plot(series: dict, name: str, width: int = 640, height: int = 480) -> str:
    """Minimal deterministic SVG: log-scale BER curves against SNR."""
    pts = [(s, b) for curve in series.values() for (s, b) in curve if b > 0]
    if not pts:
        return (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">'
            f"<title>{name}</title></svg>"
        )
    snrs = [s for s, _ in pts]
    floors = [b for _, b in pts]
    x0, x1 = min(snrs), max(snrs)
    y0, y1 = math.log10(min(floors)), math.log10(max(max(floors), 1e-12))
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    pad = 40

    def sx(v):
        return pad + (v - x0) / (x1 - x0) * (width - 2 * pad)

    def sy(v):
        lv = math.log10(max(v, 10**y0))
        return height - pad - (lv - y0) / (y1 - y0) * (height - 2 * pad)

    palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f"<title>{name}</title>",
        f'<rect x="{pad}" y="{pad}" width="{width-2*pad}" height="{height-2*pad}" '
        'fill="none" stroke="#333"/>',
    ]
    for i, (key, curve) in enumerate(sorted(series.items(), key=lambda kv: str(kv[0]))):
        visible = [(s, b) for s, b in curve if b > 0]
        if not visible:
            continue
        path = " ".join(f"{sx(s):.2f},{sy(b):.2f}" for s, b in visible)
        color = palette[i % len(palette)]
        parts.append(f'<polyline fill="none" stroke="{color}" points="{path}"/>')
        parts.append(
            f'<text x="{pad+4}" y="{pad+14+12*i}" font-size="10" fill="{color}">{key}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts)
