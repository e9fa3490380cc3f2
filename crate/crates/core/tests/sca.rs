mod common;

use common::{channels, desk_link, mode, rng, tiny_config};
use conic::{solve, SolveOptions, SolveStatus};
use duplex::channel::{split_robust, CsiErrors};
use duplex::mode::enumerate_modes;
use duplex::rate::{block_rates, dl_effective, DesignPoint, LinkModel};
use duplex::sca::{
    build_feasibility_subproblem, build_maxmin_subproblem, build_minorants, build_sr_subproblem, dl_lifted_rate,
    dl_minorant_value, initial_point, lifted_objective, prepare_expansion, refresh_time_split, lifted_rates, sca_loop, stack_dl,
    ul_lifted_rate, ul_minorant_value, Layout, MinorantCoeffs, ObjectiveKind, Problem, ScaError, StopReason,
    UlMinorantForm,
};
use duplex::SystemConfig;
use rand::Rng;

fn problem(link: &LinkModel, c1: u8, c2: u8, config: &SystemConfig) -> Problem {
    Problem::new(link, mode(c1, c2), config)
}

#[test]
fn full_layout_census_matches_closed_form() {
    let (config, link) = desk_link(0);
    let (n, l, k) = (config.half_array_size, config.num_ul, config.num_dl);
    for m in enumerate_modes() {
        let mut pr = Problem::new(&link, m, &config);
        pr.layout = Layout::Full;
        let coeffs = build_minorants(&pr, &initial_point(&pr)).unwrap();
        let sr = build_sr_subproblem(&pr, &coeffs).program.census();
        assert_eq!(sr.groups, 6 * l + 7 * k + 8, "{m}");
        assert_eq!(sr.real + sr.complex, 2 * l + (4 * n + 2) * k + 2, "{m}");
        let mm = build_maxmin_subproblem(&pr, &coeffs, 2.0).program.census();
        assert_eq!(mm.real + mm.complex, sr.real + sr.complex + 1, "{m}");
        assert_eq!(mm.groups, sr.groups, "{m}");
    }
}

#[test]
fn pure_phases_drop_their_variables() {
    let (config, link) = desk_link(1);
    let pr = problem(&link, 0, 3, &config);
    let coeffs = build_minorants(&pr, &initial_point(&pr)).unwrap();
    let sub = build_sr_subproblem(&pr, &coeffs);
    for k in 0..config.num_dl {
        assert!(sub.vars.w[k][0].is_empty());
        assert_eq!(sub.vars.w[k][1].len(), 2 * config.half_array_size);
        assert!(sub.vars.theta[k][0].is_none());
    }
    for u in 0..config.num_ul {
        assert!(sub.vars.p[u][1].is_none());
        assert!(sub.vars.p[u][0].is_some());
    }
}

#[test]
fn full_and_reduced_layouts_agree() {
    let (config, link) = desk_link(2);
    for m in enumerate_modes() {
        let mut pr = Problem::new(&link, m, &config);
        let start = initial_point(&pr);
        let coeffs = build_minorants(&pr, &start).unwrap();
        let reduced = solve(&build_sr_subproblem(&pr, &coeffs).program, &SolveOptions::default()).unwrap();
        pr.layout = Layout::Full;
        let full = solve(&build_sr_subproblem(&pr, &coeffs).program, &SolveOptions::default()).unwrap();
        assert_eq!(reduced.status.has_point(), full.status.has_point(), "{m}");
        if reduced.status.has_point() {
            let gap = (reduced.objective - full.objective).abs();
            assert!(gap <= 1e-6 * full.objective.abs().max(1.0), "{m}: {} vs {}", reduced.objective, full.objective);
        }
    }
}

/// Multiplies every design coordinate by an independent factor in
/// `1 ± frac`, keeping `μ > 1`.
fn perturb<R: Rng>(point: &DesignPoint, r: &mut R, frac: f64) -> DesignPoint {
    let mut q = point.clone();
    let f = |r: &mut R| 1.0 + r.random_range(-frac..frac);
    for w in q.w.iter_mut().flatten() {
        for z in w.iter_mut() {
            z.re *= f(r);
            z.im *= f(r);
        }
    }
    for p in q.p.iter_mut().flatten() {
        *p *= f(r);
    }
    for m in q.mu.iter_mut() {
        *m = (*m * f(r)).max(1.0 + 1e-6);
    }
    q
}

fn budget_blocks(point: &DesignPoint) -> [Vec<f64>; 2] {
    [stack_dl(point, 0), stack_dl(point, 1)]
}

fn check_tight(pr: &Problem, coeffs: &MinorantCoeffs, at: &DesignPoint) {
    for t in &coeffs.ul {
        let exact = ul_lifted_rate(pr, at, t.user, t.phase);
        let m = ul_minorant_value(t, at, pr.ul_form);
        assert!((m - exact).abs() <= 1e-8, "UL {} {}: {m} vs {exact}", t.user, t.phase);
    }
    for t in &coeffs.dl {
        let exact = dl_lifted_rate(pr, at, t.user, t.phase);
        let m = dl_minorant_value(pr, t, at);
        assert!((m - exact).abs() <= 1e-8, "DL {} {}: {m} vs {exact}", t.user, t.phase);
    }
    let b = &coeffs.dl_budget;
    let x = budget_blocks(at);
    assert!((b.linear(&x, at.mu[1]) - b.exact(&x, at.mu[1])).abs() <= 1e-8 * b.exact(&x, at.mu[1]).max(1.0));
    for (u, b) in coeffs.ul_budget.iter().enumerate() {
        let x = [vec![at.p[u][0]], vec![at.p[u][1]]];
        assert!((b.linear(&x, at.mu[1]) - b.exact(&x, at.mu[1])).abs() <= 1e-8 * b.exact(&x, at.mu[1]).max(1.0));
    }
}

fn check_dominance<R: Rng>(pr: &Problem, coeffs: &MinorantCoeffs, r: &mut R, samples: usize) -> usize {
    let mut checked = 0;
    for _ in 0..samples {
        let q = perturb(&coeffs.expansion, r, 0.2);
        for t in &coeffs.ul {
            let exact = ul_lifted_rate(pr, &q, t.user, t.phase);
            let m = ul_minorant_value(t, &q, UlMinorantForm::Certified);
            assert!(m <= exact + 1e-9, "UL {} {}: {m} > {exact}", t.user, t.phase);
            checked += 1;
        }
        for t in &coeffs.dl {
            let exact = dl_lifted_rate(pr, &q, t.user, t.phase);
            let m = dl_minorant_value(pr, t, &q);
            assert!(m <= exact + 1e-9, "DL {} {}: {m} > {exact}", t.user, t.phase);
            checked += 1;
        }
        let b = &coeffs.dl_budget;
        let x = budget_blocks(&q);
        assert!(b.linear(&x, q.mu[1]) <= b.exact(&x, q.mu[1]) * (1.0 + 1e-12) + 1e-12);
        for (u, b) in coeffs.ul_budget.iter().enumerate() {
            let x = [vec![q.p[u][0]], vec![q.p[u][1]]];
            assert!(b.linear(&x, q.mu[1]) <= b.exact(&x, q.mu[1]) * (1.0 + 1e-12) + 1e-12);
        }
    }
    checked
}

/// Accepted iterates of a run: the first few and the last.
fn sample_iterates(pr: &Problem) -> Vec<DesignPoint> {
    let out = sca_loop(pr, ObjectiveKind::SumRate).expect("desk mode solves");
    let its = &out.trace.iterates;
    let mut picked: Vec<DesignPoint> = its.iter().take(4).cloned().collect();
    picked.push(its.last().unwrap().clone());
    picked
}

#[test]
fn minorants_are_tight_and_dominated_along_a_run() {
    let (config, link) = desk_link(3);
    let mut r = rng(21);
    for (c1, c2) in [(1, 2), (0, 3), (1, 3)] {
        let pr = problem(&link, c1, c2, &config);
        for at in sample_iterates(&pr) {
            let coeffs = build_minorants(&pr, &at).unwrap();
            check_tight(&pr, &coeffs, &at);
            assert!(check_dominance(&pr, &coeffs, &mut r, 100) > 0);
        }
    }
}

#[test]
fn robust_minorants_are_tight_and_dominated() {
    let config = SystemConfig::desk();
    let ch = channels(&config, 4);
    let mut r = rng(22);
    let rc = split_robust(&ch, &CsiErrors::relative(&ch, 1e-3), &mut r).unwrap();
    let link = LinkModel::robust(&rc, config.rho2);
    for (c1, c2) in [(1, 2), (2, 3)] {
        let pr = problem(&link, c1, c2, &config);
        let out = sca_loop(&pr, ObjectiveKind::RobustSumRate).expect("robust desk mode solves");
        for at in out.trace.iterates.iter().take(3).chain(out.trace.iterates.last()) {
            let coeffs = build_minorants(&pr, at).unwrap();
            check_tight(&pr, &coeffs, at);
            check_dominance(&pr, &coeffs, &mut r, 100);
        }
    }
}

#[test]
fn robust_build_with_zero_errors_matches_perfect_build() {
    let config = SystemConfig::desk();
    let ch = channels(&config, 5);
    let rc = split_robust(&ch, &CsiErrors::zero(config.num_ul, config.num_dl), &mut rng(0)).unwrap();
    let perfect = LinkModel::perfect(&ch, config.rho2);
    let robust = LinkModel::robust(&rc, config.rho2);
    for m in enumerate_modes() {
        let a = Problem::new(&perfect, m, &config);
        let b = Problem::new(&robust, m, &config);
        let ca = build_minorants(&a, &initial_point(&a)).unwrap();
        let cb = build_minorants(&b, &initial_point(&b)).unwrap();
        assert_eq!(ca, cb, "{m}");
    }
}

#[test]
fn linearized_mu_form_can_overshoot() {
    // The plain first-order form is a tangent of G/μ, which is neither convex
    // nor concave, so raising G and μ together pushes it above the true rate.
    let (config, link) = desk_link(3);
    let mut pr = problem(&link, 1, 2, &config);
    pr.ul_form = UlMinorantForm::Linearized;
    // a quiet expansion point keeps the log small, where the overshoot shows
    let mut start = initial_point(&pr);
    for p in start.p.iter_mut().flatten() {
        *p *= 0.02;
    }
    for w in start.w.iter_mut().flatten() {
        *w *= num_complex::Complex::new(0.02, 0.0);
    }
    let coeffs = build_minorants(&pr, &start).unwrap();
    let mut worst = f64::NEG_INFINITY;
    for t in &coeffs.ul {
        for own in [1.01, 1.03, 1.1, 1.3] {
            for stretch in [1.005, 1.01, 1.03, 1.1] {
                let mut q = start.clone();
                q.p[t.user][t.phase] *= own;
                q.mu[t.phase] *= stretch;
                let lifted = ul_lifted_rate(&pr, &q, t.user, t.phase);
                worst = worst.max(ul_minorant_value(t, &q, UlMinorantForm::Linearized) - lifted);
                assert!(ul_minorant_value(t, &q, UlMinorantForm::Certified) <= lifted + 1e-12);
            }
        }
    }
    assert!(worst > 1e-6, "largest excess {worst}");
}

#[test]
fn loop_is_monotone_and_never_overstates() {
    let (config, link) = desk_link(0);
    let mut solved = 0;
    for m in enumerate_modes() {
        let pr = Problem::new(&link, m, &config);
        let out = match sca_loop(&pr, ObjectiveKind::SumRate) {
            Ok(o) => o,
            Err(ScaError::Infeasible { .. }) => continue,
            Err(e) => panic!("{m}: {e}"),
        };
        solved += 1;
        for w in out.trace.objectives.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "{m}: {} then {}", w[0], w[1]);
        }
        let report = block_rates(&link, &m, &out.point, Some(&pr.active), config.assign_threshold, 1.0).unwrap();
        assert!(report.sum_rate >= out.objective - 1e-6, "{m}: {} < {}", report.sum_rate, out.objective);
        assert!(report.sum_rate <= out.objective + 1e-4, "{m}: {} > {}", report.sum_rate, out.objective);
        let masks = &pr.masks;
        for j in 0..2 {
            for k in 0..config.num_dl {
                for a in 0..link.num_antennas() {
                    if !masks.lambda[j][a] {
                        assert_eq!(out.point.w[k][j][a].norm(), 0.0, "{m}");
                    }
                }
            }
            if masks.beta[j] {
                assert!(out.point.p.iter().all(|p| p[j] == 0.0), "{m}");
            }
        }
    }
    assert!(solved > 0);
}

#[test]
fn zero_threshold_start_is_strictly_feasible() {
    let (mut config, link) = desk_link(6);
    config.rate_threshold_bps = 0.0;
    for m in enumerate_modes() {
        let pr = Problem::new(&link, m, &config);
        let coeffs = build_minorants(&pr, &initial_point(&pr)).unwrap();
        let sub = build_feasibility_subproblem(&pr, &coeffs);
        let res = solve(&sub.program, &SolveOptions::default()).unwrap();
        assert!(res.status.has_point(), "{m}");
        assert!(res.objective > 0.0, "{m}: margin {}", res.objective);
    }
}

#[test]
fn unreachable_threshold_is_reported_infeasible() {
    let (mut config, link) = desk_link(6);
    config.rate_threshold_bps = 1e3;
    for m in enumerate_modes() {
        let pr = Problem::new(&link, m, &config);
        match sca_loop(&pr, ObjectiveKind::SumRate) {
            Err(ScaError::Infeasible { trace }) => assert_eq!(trace.stop, Some(StopReason::Infeasible)),
            other => panic!("{m}: expected infeasible, got {:?}", other.map(|o| o.objective)),
        }
    }
}

#[test]
fn feasible_desk_modes_bootstrap_quickly() {
    let mut feasible = 0;
    for seed in 0..2 {
        let (config, link) = desk_link(seed);
        for m in enumerate_modes() {
            let pr = Problem::new(&link, m, &config);
            let trace = match sca_loop(&pr, ObjectiveKind::SumRate) {
                Ok(o) => o.trace,
                Err(ScaError::Infeasible { .. }) => continue,
                Err(e) => e.trace().cloned().unwrap(),
            };
            feasible += 1;
            assert!(trace.feasibility.len() - 1 <= 30, "{m}: {} bootstrap steps", trace.feasibility.len() - 1);
            assert!(*trace.feasibility.last().unwrap() > 0.0);
        }
    }
    assert!(feasible > 0);
}

#[test]
fn initial_point_respects_every_constraint() {
    let (config, link) = desk_link(7);
    for m in enumerate_modes() {
        let pr = Problem::new(&link, m, &config);
        let x = initial_point(&pr);
        assert_eq!(x.mu, [2.0, 2.0]);
        let kd = pr.dl_budget_weights(x.mu[1]);
        assert!(kd[0] * x.dl_power(0) + kd[1] * x.dl_power(1) <= pr.bs_power * (1.0 + 1e-12), "{m}");
        let ku = pr.ul_budget_weights(x.mu[1]);
        for (u, p) in x.p.iter().enumerate() {
            assert!(ku[0] * p[0] * p[0] + ku[1] * p[1] * p[1] <= pr.ul_power * (1.0 + 1e-12), "{m}");
            for j in 0..2 {
                assert!(p[j] * p[j] <= pr.ul_cap * (1.0 + 1e-12));
                assert_eq!(p[j] > 0.0, pr.ul_active(u, j), "{m}");
            }
        }
        let half = link.half_array_size;
        for j in 0..2 {
            for i in 0..2 {
                let power: f64 = x.w.iter().map(|w| w[j].rows(i * half, half).norm_squared()).sum();
                if pr.masks.transmits(i, j) {
                    assert!(power <= pr.bs_cap * (1.0 + 1e-12), "{m}");
                } else {
                    assert_eq!(power, 0.0, "{m}");
                }
            }
            let h = dl_effective(&pr.link, &pr.masks, j);
            for k in 0..config.num_dl {
                if !pr.dl_active(k, j) {
                    continue;
                }
                let s = h[k].dotc(&x.w[k][j]);
                assert!(s.re > 0.0, "{m}");
                let coeffs = build_minorants(&pr, &x).unwrap();
                let t = coeffs.dl_term(k, j).unwrap();
                let exact = s.norm_sqr();
                assert!((t.trust(s.re) - exact).abs() <= 1e-12 * exact, "{m}");
            }
        }
    }
}

fn maxmin_config() -> SystemConfig {
    SystemConfig {
        half_array_size: 2,
        num_ul: 2,
        num_dl: 2,
        ..tiny_config()
    }
}

// Not every row binds: the last user decoded in a phase without downlink
// keeps slack that no other row can use.
#[test]
fn maxmin_level_is_the_smallest_row_of_the_subproblem() {
    let config = maxmin_config();
    let ch = channels(&config, 1);
    let link = LinkModel::perfect(&ch, config.rho2);
    let eta = 2.0;
    let mut checked = 0;
    for m in enumerate_modes() {
        let pr = Problem::new(&link, m, &config);
        let start = initial_point(&pr);
        let coeffs = build_minorants(&pr, &start).unwrap();
        let sub = build_maxmin_subproblem(&pr, &coeffs, eta);
        let res = solve(&sub.program, &SolveOptions::default()).unwrap();
        if res.status != SolveStatus::Optimal {
            continue;
        }
        let phi = res.x[sub.vars.extra.unwrap()];
        let mut x = sub.vars.extract(&res.x, &start);
        prepare_expansion(&pr, &mut x);
        let mut rows = Vec::new();
        for u in 0..config.num_ul {
            rows.push(
                (0..2)
                    .filter_map(|j| coeffs.ul_term(u, j))
                    .map(|t| ul_minorant_value(t, &x, UlMinorantForm::Certified))
                    .sum::<f64>(),
            );
        }
        for k in 0..config.num_dl {
            let v: f64 = (0..2).filter_map(|j| coeffs.dl_term(k, j)).map(|t| dl_minorant_value(&pr, t, &x)).sum();
            rows.push(v / eta);
        }
        let low = rows.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(low >= phi - 1e-6 * phi.abs().max(1.0), "{m}: row {low} below level {phi}");
        assert!(low <= phi + 1e-5 * phi.abs().max(1.0), "{m}: no row binds, {low} vs {phi}");
        checked += 1;
    }
    assert!(checked > 0);
}

#[test]
fn converged_maxmin_reports_its_smallest_scaled_rate() {
    let config = maxmin_config();
    let eta = 2.0;
    let kind = ObjectiveKind::MaxMin { eta };
    for seed in 1..3 {
        let ch = channels(&config, seed);
        let link = LinkModel::perfect(&ch, config.rho2);
        for m in enumerate_modes() {
            let pr = Problem::new(&link, m, &config);
            let Ok(out) = sca_loop(&pr, kind) else { continue };
            let (ul, dl) = lifted_rates(&pr, &out.point);
            let low = ul.iter().copied().chain(dl.iter().map(|r| r / eta)).fold(f64::INFINITY, f64::min);
            assert!((low - out.objective).abs() <= 1e-6 * low.max(1.0), "{m}: {low} vs {}", out.objective);
            assert!((lifted_objective(&pr, kind, &out.point) - low).abs() <= 1e-12 * low.max(1.0));
            if matches!(out.trace.stop, Some(StopReason::Converged)) && low > 1.0 {
                // with every link in use, the downlink side is pinned to its share
                let spread = dl.iter().map(|r| r / eta - low).fold(0.0, f64::max);
                assert!(spread <= 1e-3 * low, "{m} seed {seed}: downlink slack {spread}");
            }
        }
    }
}

#[test]
fn time_refresh_only_improves() {
    let (config, link) = desk_link(0);
    let mut moved = 0;
    for m in enumerate_modes() {
        let mut pr = Problem::new(&link, m, &config);
        pr.time_refresh = false;
        pr.max_iterations = 5;
        let Ok(out) = sca_loop(&pr, ObjectiveKind::SumRate) else { continue };
        for kind in [ObjectiveKind::SumRate, ObjectiveKind::MaxMin { eta: 1.0 }] {
            for at in &out.trace.iterates {
                let before = lifted_objective(&pr, kind, at);
                let Some(next) = refresh_time_split(&pr, kind, at) else { continue };
                moved += 1;
                assert!(lifted_objective(&pr, kind, &next) > before, "{m}");
                assert!((1.0 / next.mu[1] - 1.0 / at.mu[1]).abs() <= 0.1 + 1e-12);
                let kd = pr.dl_budget_weights(next.mu[1]);
                assert!(kd[0] * next.dl_power(0) + kd[1] * next.dl_power(1) <= pr.bs_power * (1.0 + 1e-9), "{m}");
                let ku = pr.ul_budget_weights(next.mu[1]);
                for p in &next.p {
                    assert!(ku[0] * p[0] * p[0] + ku[1] * p[1] * p[1] <= pr.ul_power * (1.0 + 1e-9), "{m}");
                }
            }
        }
        pr.fixed_mu = Some([2.0, 2.0]);
        assert!(refresh_time_split(&pr, ObjectiveKind::SumRate, &out.point).is_none());
    }
    assert!(moved > 0);
}
