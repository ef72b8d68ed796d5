"""Named verification experiments and the seeded replication pool."""
from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from functools import partial

import numpy as np

from . import arrivals as arr
from . import fractional as frac
from . import gaussian as gl
from .config import ExperimentConfig
from .fluid import compute_fluid
from .model import PolicySpec
from .report import ReplicationReport
from .stats import cov_matrix_with_se, summarize_stats

# ---------------------------------------------------------------- replication pool


def stream_base(base_seed: int, stream: int) -> int:
    """Base seed of an independent ensemble within one experiment."""
    return arr.replication_seed(base_seed, 2 ** 31 + stream)


def replicate(task, M: int, base_seed: int, workers: int = 1):
    """Run ``task(seed)`` for replications 0..M-1, results in replication order.

    The seed of replication r is ``replication_seed(base_seed, r)`` whatever
    the worker count, so the output never depends on scheduling.
    """
    seeds = [arr.replication_seed(base_seed, r) for r in range(M)]
    if workers <= 1:
        return [task(s) for s in seeds], seeds
    chunk = max(1, M // (8 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(task, seeds, chunksize=chunk)), seeds


def _path_task(seed, p, g, horizon, times, fluid, method="thinning"):
    sim = arr.simulate_scaled_path if method == "thinning" else arr.simulate_scaled_path_inversion
    path = sim(p, g, horizon, seed)
    ybar, _, N = path.evaluate(np.asarray(times, dtype=float))
    out = {"ybar": ybar, "ok": path.slopes_ok()}
    if fluid is not None:
        out["sup"] = path.sup_error(fluid)
        out["z"] = arr.fluctuation_from_ybar(ybar, p, fluid, np.asarray(times, dtype=float))
    out["N"] = N.sum(axis=-1)
    out["N1"] = N[..., 0]
    out["mart"] = N[..., 0] - float(p.n) ** p.alpha * path.Lam_at(np.asarray(times, dtype=float))
    return out


def _seed_rows(label, seeds):
    return [(label, r, s) for r, s in enumerate(seeds)]


# ---------------------------------------------------------------- experiments


def run_lln(cfg: ExperimentConfig, rep: ReplicationReport):
    p0, g = cfg.params, cfg.policy
    ladder = cfg.n_ladder or (8, 16, 32, 64)
    M = cfg.replications or 200
    T = cfg.horizon or 5.0
    times = np.array(cfg.check_times or (1.0, 2.0, 4.0))
    fluid = compute_fluid(p0, g, T, cfg.steps)
    z = cfg.tol("ci_sigmas")
    medians, sup_rows, bias_rows = [], [], []
    bias = None
    for k, n in enumerate(ladder):
        p = p0.with_n(n)
        res, seeds = replicate(partial(_path_task, p=p, g=g, horizon=T, times=times, fluid=fluid),
                               M, stream_base(cfg.base_seed, k), cfg.workers)
        rep.seeds += _seed_rows(f"n={n}", seeds)
        sups = np.array([r["sup"] for r in res])
        medians.append(float(np.median(sups)))
        sup_rows += [(n, r, s) for r, s in enumerate(sups)]
        scaled = np.array([r["ybar"] for r in res]) - fluid.U_at(times)
        scaled *= float(n) ** (p0.beta - 2.0)
        bias_rows += [(n, r, t, v) for r in range(M) for t, v in zip(times, scaled[r])]
        rep.check(f"workload_paths_valid[n={n}]", sum(r["ok"] for r in res), M, 0,
                  "every path continuous, nondecreasing, slope = active/n^(alpha-1)",
                  all(r["ok"] for r in res))
        bias = scaled
    fit = summarize_stats(np.column_stack([ladder, medians]), "slope-fit")
    lo, hi = cfg.tol("lln_slope_lo"), cfg.tol("lln_slope_hi")
    rep.check("lln_loglog_slope", fit.estimate, -(p0.beta - 2.0), hi - lo,
              f"slope in [{lo}, {hi}]", lo <= fit.estimate <= hi, fit.se)
    rep.check("lln_median_decreasing", float(np.all(np.diff(medians) < 0)), 1, 0,
              "median sup error strictly decreasing in n", bool(np.all(np.diff(medians) < 0)))
    V = fluid.V_at(times)
    for j, t in enumerate(times):
        st = summarize_stats(bias[:, j], "mean")
        rep.check(f"bias_term[n={ladder[-1]},t={t:g}]", st.estimate, V[j], z * st.se,
                  f"|mean n^(beta-2)(Ybar-U) - V| <= {z:g} SE", abs(st.estimate - V[j]) <= z * st.se, st.se)
    rep.tables["lln_sup_errors"] = (["n", "rep", "sup_error"], sup_rows)
    rep.tables["lln_bias_samples"] = (["n", "rep", "t", "scaled_error"], bias_rows)
    rep.tables["lln_targets"] = (["t", "V"], list(zip(times, V)))
    rep.series["lln_median_sup_error"] = ("n", "median_sup_error", list(ladder), medians)


def run_clt(cfg: ExperimentConfig, rep: ReplicationReport):
    p0, g = cfg.params, cfg.policy
    ladder = cfg.n_ladder or (16, 64)
    M = cfg.replications or 2000
    times = np.array(cfg.check_times or (0.5, 1.0, 2.0))
    T = cfg.horizon or float(times.max())
    fluid = compute_fluid(p0, g, T, cfg.steps)
    kit = gl.build_kit(p0, g, np.linspace(0.0, T, 9), fluid=fluid)
    target = gl.cov_Zbar_diag(times, kit)
    rows, worst = [], []
    for k, n in enumerate(ladder):
        p = p0.with_n(n)
        res, seeds = replicate(partial(_path_task, p=p, g=g, horizon=T, times=times, fluid=fluid),
                               M, stream_base(cfg.base_seed, k), cfg.workers)
        rep.seeds += _seed_rows(f"n={n}", seeds)
        Z = np.array([r["z"] for r in res])
        rows += [(n, r, t, v) for r in range(M) for t, v in zip(times, Z[r])]
        rels = []
        for j, t in enumerate(times):
            st = summarize_stats(Z[:, j], "variance")
            rel = abs(st.estimate / target[j] - 1.0)
            rels.append(rel)
            if n == ladder[-1]:
                tol = cfg.tol("clt_rel")
                rep.check(f"clt_variance[n={n},t={t:g}]", st.estimate, target[j], tol,
                          f"|Var Zbar_n / cov_Zbar - 1| <= {tol:g}", rel <= tol, st.se)
        worst.append(max(rels))
        rep.series[f"clt_variance_n{n}"] = ("t", "empirical_variance", list(times),
                                            [float(np.var(Z[:, j], ddof=1)) for j in range(len(times))])
    if len(ladder) > 1:
        rep.check(f"clt_discrepancy_decreasing[n={ladder[0]}->{ladder[-1]}]", worst[-1], worst[0], 0,
                  "max relative discrepancy shrinks from the smallest to the largest n",
                  worst[-1] < worst[0])
    rep.tables["clt_samples"] = (["n", "rep", "t", "zbar"], rows)
    rep.tables["clt_targets"] = (["t", "cov_Zbar"], list(zip(times, target)))
    rep.series["clt_target"] = ("t", "cov_Zbar", list(times), list(target))


def _sample_limit_zbar(kit, M, seed, columns=None, chunk=500):
    """Limit Zbar paths drawn in chunks; chunk c uses seed replication_seed(seed, offset)."""
    parts, done = [], 0
    while done < M:
        m = min(chunk, M - done)
        Z = gl.solve_limit_Zbar(gl.sample_Rbar(kit, m, arr.replication_seed(seed, done)), kit)
        parts.append(Z if columns is None else Z[:, columns])
        done += m
    return np.concatenate(parts)


def _column_variance(Z):
    n = Z.shape[0]
    c = Z - Z.mean(axis=0)
    m2 = np.mean(c ** 2, axis=0)
    m4 = np.mean(c ** 4, axis=0)
    s2 = m2 * n / (n - 1)
    se = np.sqrt(np.maximum(m4 - s2 ** 2 * (n - 3) / (n - 1), 0.0) / n)
    return s2, se


def run_moment_bound(cfg: ExperimentConfig, rep: ReplicationReport):
    p, g = cfg.params, cfg.policy
    T = cfg.horizon or 20.0
    fluid = compute_fluid(p, g, T, cfg.steps)
    grid = np.linspace(0.0, T, 256)
    kit = gl.build_kit(p, g, np.linspace(0.0, T, 2), fluid=fluid)
    bound = kit.momentBound
    var = gl.cov_Zbar_diag(grid, kit)
    rep.check("moment_bound_quadrature", float(var.max()), bound, 0,
              "max over 256-point grid of cov_Zbar(t,t) <= moment bound", bool(np.all(var <= bound)))
    h = cfg.grid_step or 0.05
    M = cfg.replications or 2000
    sgrid = np.arange(0.0, T + 0.5 * h, h)
    skit = gl.build_kit(p, g, sgrid, fluid=fluid)
    seed = stream_base(cfg.base_seed, 0)
    svar, sse = _column_variance(_sample_limit_zbar(skit, M, seed))
    z = cfg.tol("ci_sigmas")
    excess = svar - z * sse - bound
    j = int(np.argmax(excess))
    rep.check("moment_bound_sampled", float(svar[j]), bound, z * sse[j],
              f"sampled Var Zbar(t) - {z:g} SE <= bound at every grid node", bool(np.all(excess <= 0)), sse[j])
    rep.seeds.append(("limit_zbar", 0, seed))
    rep.tables["moment_quadrature"] = (["t", "cov_Zbar"], list(zip(grid, var)))
    rep.tables["moment_sampled"] = (["t", "variance", "se"], list(zip(sgrid, svar, sse)))
    rep.tables["moment_constants"] = (["name", "value"], [("bound", bound), ("mu", kit.mu)])
    rep.series["moment_quadrature"] = ("t", "cov_Zbar", list(grid), list(var))
    rep.series["moment_sampled"] = ("t", "variance", list(sgrid), list(svar))


def run_baseline(cfg: ExperimentConfig, rep: ReplicationReport):
    p = cfg.params
    T = cfg.horizon or 20.0
    zero = PolicySpec.zero()
    fluid0 = compute_fluid(p, zero, T, cfg.steps)
    kit0 = gl.build_kit(p, zero, np.linspace(0.0, T, 2), fluid=fluid0)
    ts = np.linspace(1.0, T, 40)
    var0 = gl.cov_Zbar_diag(ts, kit0)
    fit = summarize_stats(np.column_stack([ts, var0]), "slope-fit")
    tol = cfg.tol("exponent_tol")
    rep.check("baseline_growth_exponent", fit.estimate, 4.0 - p.beta, tol,
              f"|fitted exponent - (4-beta)| <= {tol:g}", abs(fit.estimate - (4.0 - p.beta)) <= tol, fit.se)
    ctrl = cfg.policy if not cfg.policy.baseline else PolicySpec.linear(1.0)
    fluid1 = compute_fluid(p, ctrl, T, cfg.steps)
    kit1 = gl.build_kit(p, ctrl, np.linspace(0.0, T, 2), fluid=fluid1)
    var1 = gl.cov_Zbar_diag(ts, kit1)
    rep.check("controlled_bounded", float(var1.max()), kit1.momentBound, 0,
              "with control cov_Zbar(t,t) stays below the moment bound", bool(np.all(var1 <= kit1.momentBound)))
    rep.check("baseline_exceeds_controlled", float(var0[-1]), float(var1[-1]), 0,
              "without control the variance at the horizon exceeds the controlled one", var0[-1] > var1[-1])
    rep.tables["baseline_variance"] = (["t", "no_control", "controlled"], list(zip(ts, var0, var1)))
    rep.series["baseline_no_control"] = ("t", "variance", list(ts), list(var0))
    rep.series["baseline_controlled"] = ("t", "variance", list(ts), list(var1))


def run_longrun(cfg: ExperimentConfig, rep: ReplicationReport):
    p, g = cfg.params, cfg.policy
    c = frac.fou_constants(p, g)
    t = (cfg.check_times or (1.0,))[0]
    mults = (1.0, 2.5, 5.0, 10.0, 20.0)
    diags = [frac.longrun_diag(m / c.kappa, t, c, p, g) for m in mults]
    tol = cfg.tol("longrun_rel")
    names = ("zbar_second_moment", "rbar_shift_second_moment", "zbar_rbar_shift_cov")
    for i, name in enumerate(names):
        final = diags[-1].rel_gaps[i]
        lim = (diags[-1].zbar_var_limit, diags[-1].rbar_var_limit, diags[-1].cross_limit)[i]
        val = (diags[-1].zbar_var, diags[-1].rbar_var, diags[-1].cross)[i]
        rep.check(f"{name}_gap[T=20/kappa]", val, lim, tol, f"relative gap to the limit <= {tol:g}", final <= tol)
        seq = [d.gaps[i] for d in diags[:4]]
        mono = bool(np.all(np.diff(seq) < 0))
        rep.check(f"{name}_gap_monotone", float(mono), 1, 0,
                  "absolute gap strictly decreasing over T in {1,2.5,5,10}/kappa", mono)
    rows = [(d.T, d.t, d.zbar_var, d.zbar_var_limit, d.rbar_var, d.rbar_var_limit, d.cross, d.cross_limit)
            for d in diags]
    rep.tables["longrun"] = (["T", "t", "zbar_var", "zbar_var_limit", "rbar_var", "rbar_var_limit",
                              "cross", "cross_limit"], rows)
    rep.series["longrun_zbar_gap"] = ("T", "relative_gap", [d.T for d in diags], [d.rel_gaps[0] for d in diags])
    rep.notes.append("gaps decay like T^(2-beta); see README for the rate")


def run_fou_verify(cfg: ExperimentConfig, rep: ReplicationReport):
    p, g = cfg.params, cfg.policy
    c = frac.fou_constants(p, g)
    lags = np.array(cfg.check_times or (0.0, 0.5, 1.0, 2.0))
    T = cfg.horizon or 20.0 / c.kappa
    h = cfg.grid_step or 0.005
    M = cfg.replications or 5000
    z = cfg.tol("ci_sigmas")
    horizon = T + lags.max()
    grid = np.arange(0.0, horizon + 0.5 * h, h)
    fluid = compute_fluid(p, g, grid[-1], cfg.steps)
    kit = gl.build_kit(p, g, grid, fluid=fluid)
    idx = np.rint((T + lags) / h).astype(int)
    seed_a = stream_base(cfg.base_seed, 0)
    A = _sample_limit_zbar(kit, M, seed_a, columns=idx)
    fgrid = np.arange(0.0, lags.max() + 0.5 * h, h)
    seed_b = stream_base(cfg.base_seed, 1)
    Zf = frac.sample_fou(fgrid, c, p, g, M, seed_b)
    B = Zf[:, np.rint(lags / h).astype(int)]
    ca, sa = cov_matrix_with_se(A)
    cb, sb = cov_matrix_with_se(B)
    rows = []
    for i in range(len(lags)):
        for j in range(i, len(lags)):
            se = math.hypot(sa[i, j], sb[i, j])
            ok = abs(ca[i, j] - cb[i, j]) <= z * se
            rep.check(f"fou_cov[{lags[i]:g},{lags[j]:g}]", ca[i, j], cb[i, j], z * se,
                      f"limit Zbar(T+.) vs fOU sampler within {z:g} joint SE", ok, se)
            rows.append((lags[i], lags[j], ca[i, j], sa[i, j], cb[i, j], sb[i, j]))
    rep.check("fou_stationary_variance", float(cb[0, 0]), c.sigma0sq, z * sb[0, 0],
              f"fOU sampler Var Z(0) within {z:g} SE of sigma0^2", abs(cb[0, 0] - c.sigma0sq) <= z * sb[0, 0], sb[0, 0])
    rep.seeds += [("limit_zbar", 0, seed_a), ("fou", 0, seed_b)]
    rep.tables["fou_covariances"] = (["s", "t", "limit_cov", "limit_se", "fou_cov", "fou_se"], rows)
    rep.series["fou_variance_by_lag"] = ("lag", "fou_variance", list(lags), list(np.diag(cb)))


def run_selftest(cfg: ExperimentConfig, rep: ReplicationReport):
    p0, g = cfg.params, cfg.policy
    n = (cfg.n_ladder or (16,))[0]
    p = p0.with_n(n)
    M = cfg.replications or 1000
    T = cfg.horizon or 5.0
    z = cfg.tol("ci_sigmas")
    pmin = cfg.tol("ks_pvalue")
    res = {}
    for k, method in enumerate(("thinning", "inversion")):
        out, seeds = replicate(partial(_path_task, p=p, g=g, horizon=T, times=[T], fluid=None, method=method),
                               M, stream_base(cfg.base_seed, k), cfg.workers)
        rep.seeds += _seed_rows(method, seeds)
        res[method] = out
        mart = np.array([r["mart"][0] for r in out])
        st = summarize_stats(mart, "mean")
        rep.check(f"martingale_identity[{method}]", st.estimate, 0.0, z * st.se,
                  f"|mean(N - n^alpha Lambda_n)| <= {z:g} SE", abs(st.estimate) <= z * st.se, st.se)
        rep.check(f"workload_paths_valid[{method}]", sum(r["ok"] for r in out), M, 0,
                  "every path continuous, nondecreasing, slope = active/n^(alpha-1)", all(r["ok"] for r in out))
        rep.tables[f"selftest_{method}"] = (["rep", "N_T", "ybar_T", "compensated"],
                                           [(i, r["N"][0], r["ybar"][0], r["mart"][0]) for i, r in enumerate(out)])
    for key, label in (("N", "arrivals"), ("ybar", "ybar")):
        a = [r[key][0] for r in res["thinning"]]
        b = [r[key][0] for r in res["inversion"]]
        st = summarize_stats(a, "ks-two-sample", other=b)
        rep.check(f"thinning_vs_inversion_ks[{label}]", st.pvalue, pmin, pmin, f"KS p-value > {pmin:g}",
                  st.pvalue > pmin)
    rng = np.random.default_rng(np.random.SeedSequence(stream_base(cfg.base_seed, 2)))
    draws = arr.sample_session_length(rng.random(100_000), p)
    st = summarize_stats(draws, "ks-one-sample", cdf=lambda r: arr.session_cdf(r, p))
    rep.check("session_length_ks", st.pvalue, pmin, pmin, f"one-sample KS p-value > {pmin:g}", st.pvalue > pmin)
    _fbm_checks(cfg, rep, (4.0 - p0.beta) / 2.0)


def fbm_embedding_cov(grid, H):
    """Covariance of B on the grid implied by the circulant embedding's first row."""
    n = len(grid) - 1
    lam = frac.circulant_eigenvalues(n, H, grid[1] - grid[0])
    row = np.fft.ifft(lam).real[: n]
    idx = np.abs(np.subtract.outer(np.arange(n), np.arange(n)))
    inc = row[idx]
    cum = np.cumsum(np.cumsum(inc, axis=0), axis=1)
    out = np.zeros((n + 1, n + 1))
    out[1:, 1:] = cum
    return out


def _fbm_checks(cfg, rep, H):
    z = cfg.tol("ci_sigmas")
    pmin = cfg.tol("ks_pvalue")
    grid = np.linspace(0.0, 2.0, 65)
    target = frac.fbm_cov_matrix(grid, H)
    err = float(np.max(np.abs(fbm_embedding_cov(grid, H) - target)))
    rep.check("fbm_target_covariance", err, 0.0, 1e-10, "embedded covariance equals fBm covariance to 1e-10",
              err <= 1e-10)
    Mf = 2000
    ens = {}
    for k, method in enumerate(("circulant", "cholesky")):
        seed = stream_base(cfg.base_seed, 10 + k)
        ens[method] = frac.sample_fbm(grid, H, Mf, seed, method)
        rep.seeds.append((f"fbm_{method}", 0, seed))
    j1 = int(np.argmin(np.abs(grid - 1.0)))
    st = summarize_stats(ens["circulant"].paths[:, j1], "ks-two-sample", other=ens["cholesky"].paths[:, j1])
    rep.check("fbm_methods_ks", st.pvalue, pmin, pmin, f"KS p-value on B(1) > {pmin:g}", st.pvalue > pmin)
    for t in (0.5, 1.0, 2.0):
        j = int(np.argmin(np.abs(grid - t)))
        st = summarize_stats(ens["circulant"].paths[:, j], "variance")
        tgt = t ** (2 * H)
        rep.check(f"fbm_variance[t={t:g}]", st.estimate, tgt, z * st.se, f"|Var B(t) - t^(2H)| <= {z:g} SE",
                  abs(st.estimate - tgt) <= z * st.se, st.se)
    rep.tables["fbm_B1"] = (["rep", "circulant", "cholesky"],
                            [(r, ens["circulant"].paths[r, j1], ens["cholesky"].paths[r, j1]) for r in range(Mf)])


def run_fluid(cfg: ExperimentConfig, rep: ReplicationReport):
    T = cfg.horizon or 10.0
    fluid = compute_fluid(cfg.params, cfg.policy, T, cfg.steps)
    header, data = fluid.to_rows()
    rep.tables["fluid"] = (header, [tuple(r) for r in data])
    rep.series["fluid_offset"] = ("t", "u", list(fluid.t), list(fluid.u))
    rep.series["fluid_V"] = ("t", "V", list(fluid.t), list(fluid.V))
    if not cfg.policy.baseline:
        ok = bool(np.all(np.abs(fluid.u) <= abs(fluid.K) + 1e-8))
        rep.check("offset_bounded", float(np.max(np.abs(fluid.u))), abs(fluid.K), 1e-8, "|U - bt| <= |K|", ok)
    rep.tables["fluid_scalars"] = (["name", "value"], [("K", fluid.K), ("mu", fluid.mu), ("K1", fluid.K1)])


def run_constants(cfg: ExperimentConfig, rep: ReplicationReport):
    p, g = cfg.params, cfg.policy
    c = frac.fou_constants(p, g)
    fluid = compute_fluid(p, g, 1.0, 16)
    bound, mu = gl.moment_bound(p, fluid)
    ident = frac.stationary_variance_identity(c)
    rep.check("sigma0sq_quadrature_vs_closed", c.sigma0sq, c.sigma0sq_closed, 1e-6,
              "relative difference <= 1e-6", abs(c.sigma0sq / c.sigma0sq_closed - 1) <= 1e-6)
    rep.check("sigma0sq_fou_identity", c.sigma0sq, ident, 1e-8,
              "sigma0^2 = sigma^2 H Gamma(2H) kappa^(-2H) within 1e-8 relative", abs(c.sigma0sq / ident - 1) <= 1e-8)
    rep.check("moment_bound_dominates", bound, c.sigma0sq, 0, "moment bound >= sigma0^2", bound >= c.sigma0sq)
    rep.tables["constants"] = (["name", "value"],
                               [("a", p.a), ("kappa", c.kappa), ("H", c.H), ("sigma", c.sigma),
                                ("sigma_sq", c.sigma ** 2), ("sigma0sq", c.sigma0sq),
                                ("sigma0sq_closed", c.sigma0sq_closed), ("moment_bound", bound), ("mu", mu)])
    rep.notes.append("constants: " + c.as_text().strip().replace("\n", ", "))


RUNNERS = {
    "lln": run_lln,
    "clt": run_clt,
    "moment-bound": run_moment_bound,
    "longrun": run_longrun,
    "fou-verify": run_fou_verify,
    "baseline-no-control": run_baseline,
    "sampler-selftest": run_selftest,
    "fluid": run_fluid,
    "constants": run_constants,
}


def config_echo(cfg: ExperimentConfig) -> dict:
    p, g = cfg.params, cfg.policy
    echo = {"beta": p.beta, "theta": p.theta, "alpha": p.alpha, "b": p.b, "d": p.d,
            "policy": f"{g.kind}({g.c1},{g.c2})", "base_seed": cfg.base_seed, "steps": cfg.steps}
    for key in ("horizon", "replications", "grid_step"):
        if getattr(cfg, key) is not None:
            echo[key] = getattr(cfg, key)
    if cfg.n_ladder:
        echo["n_ladder"] = ",".join(map(str, cfg.n_ladder))
    if cfg.check_times:
        echo["check_times"] = ",".join(f"{t:g}" for t in cfg.check_times)
    return echo


def run_experiment(cfg: ExperimentConfig) -> ReplicationReport:
    """Dispatch ``cfg.experiment``; a failure mid-run is recorded, then re-raised."""
    rep = ReplicationReport(cfg.experiment, config_echo(cfg))
    start = time.perf_counter()
    try:
        RUNNERS[cfg.experiment](cfg, rep)
    except Exception as exc:
        rep.notes.append(f"run aborted: {type(exc).__name__}: {exc}")
        rep.check("completed", 0, 1, 0, "experiment ran to completion", False)
        rep.runtime = time.perf_counter() - start
        exc.partial_report = rep
        raise
    rep.runtime = time.perf_counter() - start
    return rep
