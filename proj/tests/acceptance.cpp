// Acceptance suite: one PASS/FAIL line per criterion on stdout, exit status 1
// if any criterion fails. Usage: acceptance [--workers N] [--only K]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dbe/dbe.hpp"
#include "support/oracles.hpp"

using namespace dbe;
namespace ex = dbe::experiments;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3g", x);
    return buf;
}

unsigned g_workers = 4;
const std::filesystem::path kArtifacts = "acceptance_artifacts";

ex::RunArtifact run_case(const ex::Scenario& base, std::size_t n, double tau, std::optional<std::size_t> steps = {}) {
    ex::Scenario s = base;
    s.grid_sizes = {n};
    s.time_steps = {tau};
    if (steps) s.n_steps = steps;
    s.validate();
    return ex::run_single(s, n, tau, s.solver);
}

// 1. Mass of u nondecreasing for both scenarios at N = 128, tau = 1e-4.
Outcome mass_monotonicity() {
    Outcome o;
    std::ostringstream d;
    for (const ex::Scenario& s : {ex::Scenario::fast_default(), ex::Scenario::slow_default()}) {
        const auto t0 = Clock::now();
        const ex::RunArtifact art = run_case(s, 128, 1e-4);
        const double secs = seconds_since(t0);
        const double allowed = 10.0 * s.solver.residual_tol;
        double worst = 0.0;
        for (std::size_t k = 1; k < art.records.size(); ++k) {
            worst = std::max(worst, art.records[k - 1].mass_u - art.records[k].mass_u);
        }
        const bool ok = worst <= allowed && secs <= 30.0;
        o.pass = o.pass && ok;
        d << s.name << ": steps=" << art.records.size() - 1 << " max_decrease=" << fmt(worst) << " (allowed "
          << fmt(allowed) << ") time=" << fmt(secs) << "s; ";
    }
    o.detail = d.str();
    return o;
}

// 2. Exponential decay of the relative entropy and the certified bound.
Outcome entropy_decay() {
    Outcome o;
    std::ostringstream d;
    const auto t0 = Clock::now();
    struct Case {
        ex::Scenario s;
        double tau;
    };
    for (const Case& c : {Case{ex::Scenario::slow_default(), 1e-5}, Case{ex::Scenario::fast_default(), 1e-4}}) {
        const ex::RunArtifact art = run_case(c.s, 128, c.tau);
        bool strict = true;
        for (std::size_t k = 1; k < art.records.size(); ++k) {
            strict = strict && art.records[k].rel_entropy < art.records[k - 1].rel_entropy;
        }
        const DecayCertificate& cert = art.certificate;
        const bool ok = strict && cert.fitted_rate > 0.0 && cert.bound_pass;
        o.pass = o.pass && ok;
        d << c.s.name << "(tau=" << fmt(c.tau) << ", " << art.records.size() - 1 << " steps): strict=" << strict
          << " slope=" << fmt(-cert.fitted_rate) << " lambda=" << fmt(cert.lambda)
          << " bound=" << (cert.bound_pass ? "pass" : "fail") << "; ";
    }
    const double secs = seconds_since(t0);
    o.pass = o.pass && secs <= 60.0;
    d << "time=" << fmt(secs) << "s";
    o.detail = d.str();
    return o;
}

// Informational: the decay bound on the remaining default (N, tau) pairs.
void entropy_decay_other_runs() {
    struct Case {
        ex::Scenario s;
        double tau;
    };
    for (const Case& c : {Case{ex::Scenario::slow_default(), 1e-4}, Case{ex::Scenario::fast_default(), 1e-5}}) {
        const ex::RunArtifact art = run_case(c.s, 128, c.tau);
        std::printf("[INFO] 2  %s N=128 tau=%s (%zu steps): decay bound %s at slack 1e-8\n",
                    c.s.name.c_str(), fmt(c.tau).c_str(), art.records.size() - 1,
                    art.certificate.bound_pass ? "pass" : "fail");
    }
}

// 3. A1 with the closed-form constants along several trajectories.
Outcome a1_sandwich() {
    Outcome o;
    struct Case {
        double alpha, beta;
        InitialCase init;
        double tau;
        std::size_t steps;
    };
    const std::vector<Case> cases{
        {2.0, 0.5, InitialCase::fast, 1e-4, 500}, {3.0, 4.0, InitialCase::slow, 1e-5, 50},
        {1.5, 0.8, InitialCase::fast, 1e-4, 200}, {2.5, 0.3, InitialCase::fast, 1e-4, 200},
        {2.0, 2.0, InitialCase::slow, 1e-5, 50},  {4.0, 1.5, InitialCase::slow, 1e-5, 50},
        {1.2, 3.0, InitialCase::slow, 1e-5, 50},
    };
    std::size_t checked = 0, failed = 0;
    std::ostringstream d;
    for (const Case& c : cases) {
        const StateV v0 = to_v(barenblatt_init(GridSpec(128), c.beta, c.init), c.alpha);
        const Trajectory t = simulate(v0, {c.alpha, c.beta, c.tau}, c.steps);
        const auto recs = evaluate_trajectory(t, total_mass_u(t.states.back(), c.alpha));
        const A1Constants k = a1_constants(c.alpha, c.beta);
        const A1Check r = check_a1(recs, k.C_m, k.C_M, 1e-8);
        checked += r.checked;
        if (!r.pass) {
            ++failed;
            d << "fail at (" << c.alpha << "," << c.beta << ") step " << r.worst_index.value_or(0) << "; ";
        }
    }
    o.pass = failed == 0;
    d << cases.size() << " trajectories, " << checked << " steps checked, " << failed << " failing";
    o.detail = d.str();
    return o;
}

// 4. Tight synthetic sequences reproduce the bound with equality.
Outcome synthetic_tight() {
    std::mt19937_64 rng(404);
    std::uniform_real_distribution<double> uh(0.1, 10.0), ul(0.1, 20.0), ut(1e-4, 1e-1), uc(0.5, 3.0);
    double worst = 0.0;
    bool pass = true;
    for (int trial = 0; trial < 100; ++trial) {
        const double H0 = uh(rng), lambda = ul(rng), tau = ut(rng), C = uc(rng);
        const std::size_t n = 200;
        std::vector<FunctionalRecord> recs(n + 1);
        std::vector<double> H(n + 1), F(n + 1);
        for (std::size_t k = 0; k <= n; ++k) {
            H[k] = H0 * std::pow(1.0 + lambda * tau, -static_cast<double>(k));
            F[k] = lambda * H[k] / C;
            recs[k].fisher_F = F[k];
            recs[k].rel_entropy = H[k];
            recs[k].production_P = k == 0 ? 0.0 : (H[k - 1] - H[k]) / tau;
        }
        pass = pass && check_a1(recs, C, C, 1e-10).pass;
        const double kappa = estimate_kappa(F, tau);
        const DecayParams dp = decay_params(C, C, kappa, tau);
        const BoundCheck b = verify_decay_bound(H, dp.lambda, dp.eta, tau, 1e-12);
        pass = pass && b.pass;
        for (std::size_t k = 0; k <= n; ++k) {
            const double bound = H0 * std::exp(-dp.eta * dp.lambda * static_cast<double>(k) * tau);
            worst = std::max(worst, std::abs(H[k] / bound - 1.0));
        }
    }
    return {pass && worst <= 1e-12, "100 tight sequences, max |H_k/bound_k - 1| = " + fmt(worst)};
}

// 5. Region scans in (A, B) and (alpha, beta).
ineq::RegionScan g_scan_quarter;

Outcome region_scans() {
    const auto t0 = Clock::now();
    ineq::ScanOptions opts;
    opts.workers = g_workers;
    const ineq::AxisRange A = ineq::AxisRange::parse("0:3:150"), B = ineq::AxisRange::parse("-2:6:200");
    g_scan_quarter = ineq::region_scan_ab(A, B, 0.25, opts);
    const ineq::RegionScan hundredth = ineq::region_scan_ab(A, B, 0.01, opts);
    std::size_t line = 0, line_bad = 0, outside = 0, not_nested = 0, adm_q = 0, adm_h = 0, suspect = 0;
    for (std::size_t k = 0; k < g_scan_quarter.cells.size(); ++k) {
        const auto& q = g_scan_quarter.cells[k];
        const auto& h = hundredth.cells[k];
        adm_q += q.admissible();
        adm_h += h.admissible();
        suspect += q.verdict == ineq::Verdict::boundary_suspect;
        if (q.p == 1.0) {
            ++line;
            line_bad += !q.admissible() || !h.admissible();
        }
        for (const auto* c : {&q, &h}) {
            if (c->admissible() && !ineq::rc_closure_membership(*c->ab, 1e-9)) ++outside;
        }
        if (q.admissible() && !h.admissible()) ++not_nested;
    }
    {
        std::filesystem::create_directories(kArtifacts);
        std::ofstream f1(kArtifacts / "region_ab_eps0.25.csv"), f2(kArtifacts / "region_ab_eps0.01.csv");
        g_scan_quarter.write_csv(f1);
        hundredth.write_csv(f2);
    }

    const ineq::AxisRange R = ineq::AxisRange::parse("0:4:100");
    const ineq::RegionScan s = ineq::region_scan_alphabeta(R, R, 0.25, opts);
    std::size_t sline = 0, sline_bad = 0, s_outside = 0, adm_s = 0;
    for (std::size_t i = 0; i < R.count; ++i) {
        for (std::size_t j = 0; j < R.count; ++j) {
            const auto& c = s.at(i, j);
            adm_s += c.admissible();
            if (i == j + 25) {
                ++sline;
                sline_bad += !c.admissible();
            }
            if (c.admissible() && !ineq::sc_closure_membership(c.p, c.q, 1e-9)) ++s_outside;
        }
    }
    {
        std::ofstream f(kArtifacts / "region_alphabeta_eps0.25.csv");
        s.write_csv(f);
    }
    const double secs = seconds_since(t0);
    const bool pass = line == B.count && line_bad == 0 && outside == 0 && not_nested == 0 && sline == 75 &&
                      sline_bad == 0 && s_outside == 0 && secs <= 300.0;
    std::ostringstream d;
    d << "A=1 cells " << line - line_bad << "/" << line << " admissible; admissible " << adm_q << " (eps=1/4, "
      << suspect << " boundary_suspect), " << adm_h << " (eps=1/100); outside R_c " << outside
      << "; nesting violations " << not_nested << "; alpha-beta=1 cells " << sline - sline_bad << "/" << sline
      << " admissible; outside S_c " << s_outside << " (of " << adm_s << " admissible); time=" << fmt(secs)
      << "s with " << g_workers << " workers";
    return {pass, d.str()};
}

ineq::ABPoint random_rc(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> ua(0.05, 3.0), ub(-2.0, 6.0);
    for (;;) {
        const ineq::ABPoint ab{ua(rng), ub(rng)};
        if (ineq::rc_membership(ab)) return ab;
    }
}

// 6. Local expansion around (1, 1).
Outcome local_expansion() {
    std::mt19937_64 rng(606);
    std::uniform_real_distribution<double> uv(-1.0, 1.0);
    std::vector<double> hs;
    for (int j = 0; j < 8; ++j) hs.push_back(std::ldexp(1e-2, -j));
    double min_order = INFINITY, min_limit = INFINITY;
    std::size_t exact = 0;
    for (int p = 0; p < 20; ++p) {
        const ineq::ABPoint ab = random_rc(rng);
        const double kappa = ineq::kappa_c(ab), c = ineq::c_shift(ab, kappa);
        for (int q = 0; q < 10; ++q) {
            const double u = uv(rng), v = uv(rng);
            const auto rep = ineq::local_expansion_check(ab, kappa, c, ineq::canonical_rho(ab), u, v, hs);
            min_limit = std::min(min_limit, rep.limit);
            if (std::isnan(rep.observed_order)) {
                ++exact;
                continue;
            }
            min_order = std::min(min_order, rep.observed_order);
        }
    }
    std::ostringstream d;
    d << "200 cases, h from 1e-2 to " << fmt(hs.back()) << ": min observed order " << fmt(min_order)
      << ", min limit " << fmt(min_limit) << ", exact cases " << exact;
    return {min_order >= 0.8 && min_limit >= -1e-8, d.str()};
}

// 7. Power-mean ordering and the discrete Poincare inequality.
Outcome appendix_oracles() {
    std::mt19937_64 rng(707);
    std::uniform_real_distribution<double> ux(0.0, 10.0), ue(0.01, 5.0);
    std::size_t order_bad = 0;
    for (int t = 0; t < 10000; ++t) {
        const auto b = power_mean_bounds(ux(rng), ux(rng), ue(rng), ue(rng));
        const double tol = 1e-12 * std::abs(b.upper);
        order_bad += !(b.lower <= b.mid + tol && b.mid <= b.upper + tol);
    }
    double sharp = 0.0;
    std::size_t poincare_bad = 0;
    std::normal_distribution<double> g(0.0, 1.0);
    for (std::size_t n : {4u, 16u, 128u}) {
        const double cp = poincare_discrete(GridSpec(n));
        const double h = 1.0 / static_cast<double>(n);
        std::vector<double> z(n);
        for (std::size_t i = 0; i < n; ++i) z[i] = std::cos(2.0 * std::numbers::pi * static_cast<double>(i + 1) * h);
        auto [grad, l2] = oracle::poincare_sides(z);
        sharp = std::max(sharp, std::abs(l2 - cp * grad) / l2);
        for (int t = 0; t < 1000; ++t) {
            double mean = 0.0;
            for (double& x : z) {
                x = g(rng);
                mean += x;
            }
            mean /= static_cast<double>(n);
            for (double& x : z) x -= mean;
            std::tie(grad, l2) = oracle::poincare_sides(z);
            poincare_bad += l2 > cp * grad * (1.0 + 1e-12);
        }
    }
    std::ostringstream d;
    d << "ordering violations " << order_bad << "/10000; sharpness error " << fmt(sharp)
      << "; Poincare violations " << poincare_bad << "/3000";
    return {order_bad == 0 && sharp <= 1e-10 && poincare_bad == 0, d.str()};
}

// 8. Two-node implicit step against the bracketing oracle.
Outcome two_node_oracle() {
    std::mt19937_64 rng(808);
    std::uniform_real_distribution<double> uv(0.05, 5.0), ua(1.1, 4.0), ub(0.2, 4.0), ur(0.05, 1.0);
    double worst = 0.0;
    std::size_t missing = 0;
    for (int t = 0; t < 50; ++t) {
        const double p1 = uv(rng), p2 = uv(rng), alpha = ua(rng), beta = ub(rng);
        const double tau = ur(rng) * 0.25 / (alpha * beta * std::max(p1, p2));
        const StepResult r = step(StateV(GridSpec(2), {p1, p2}), {alpha, beta, tau});
        const auto ref = oracle::two_node_step(p1, p2, alpha, beta, tau);
        if (!ref) {
            ++missing;
            continue;
        }
        worst = std::max({worst, std::abs(r.state[0] - ref->first), std::abs(r.state[1] - ref->second)});
    }
    std::ostringstream d;
    d << "50 draws: max component error " << fmt(worst) << ", oracle failures " << missing;
    return {worst <= 1e-10 && missing == 0, d.str()};
}

// 9. Discrete summation-by-parts inequality.
Outcome sbp_inequality() {
    std::mt19937_64 rng(909);
    std::uniform_real_distribution<double> ub(0.0, 4.0), uw(0.0, 3.0), u01(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> un(2, 64);
    std::size_t line_fail = 0;
    for (int t = 0; t < 100000; ++t) {
        std::vector<double> w(un(rng));
        for (double& x : w) x = u01(rng) < 0.15 ? 0.0 : uw(rng);
        line_fail += !ineq::sbp_inequality_check(w, {1.0, ub(rng)}, 1.0).holds;
    }

    // Random admissible cells of the eps = 1/4 scan.
    std::vector<ineq::ABPoint> region;
    for (const auto& c : g_scan_quarter.cells) {
        if (c.verdict == ineq::Verdict::admissible) region.push_back(*c.ab);
    }
    std::size_t region_fail = 0;
    std::filesystem::create_directories(kArtifacts);
    std::ofstream bad(kArtifacts / "sbp_counterexamples.csv");
    bad << "A,B,kappa,sample,lhs,rhs\n";
    std::uniform_real_distribution<double> near(0.95, 1.05);
    if (!region.empty()) {
        std::uniform_int_distribution<std::size_t> pick(0, region.size() - 1);
        for (int p = 0; p < 20; ++p) {
            const ineq::ABPoint ab = region[pick(rng)];
            const double kappa = 0.25 * ab.A;
            for (int t = 0; t < 10000; ++t) {
                std::vector<double> w(16);
                for (double& x : w) x = near(rng);
                const auto r = ineq::sbp_inequality_check(w, ab, kappa);
                if (!r.holds) {
                    ++region_fail;
                    bad << ex::format_double(ab.A) << ',' << ex::format_double(ab.B) << ','
                        << ex::format_double(kappa) << ',' << t << ',' << ex::format_double(r.lhs) << ','
                        << ex::format_double(r.rhs) << '\n';
                }
            }
        }
    }
    std::ostringstream d;
    d << "A=1 line: " << line_fail << " failures in 100000 vectors; region (" << region.size()
      << " admissible cells, 20 sampled): " << region_fail << " failures in 200000 vectors";
    return {line_fail == 0 && region_fail == 0 && !region.empty(), d.str()};
}

}  // namespace

int main(int argc, char** argv) {
    int only = 0;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--workers" && i + 1 < argc) {
            g_workers = static_cast<unsigned>(std::strtoul(argv[++i], nullptr, 10));
        } else if (a == "--only" && i + 1 < argc) {
            only = std::atoi(argv[++i]);
        } else {
            std::fprintf(stderr, "usage: acceptance [--workers N] [--only K]\n");
            return 1;
        }
    }
    struct Criterion {
        int id;
        const char* name;
        std::function<Outcome()> fn;
    };
    const std::vector<Criterion> criteria{
        {1, "mass monotonicity", mass_monotonicity},
        {2, "exponential entropy decay", entropy_decay},
        {3, "A1 sandwich with closed-form constants", a1_sandwich},
        {4, "tight synthetic decay sequences", synthetic_tight},
        {5, "region scans", region_scans},
        {6, "local expansion near (1,1)", local_expansion},
        {7, "power-mean ordering and Poincare inequality", appendix_oracles},
        {8, "two-node solver oracle", two_node_oracle},
        {9, "summation-by-parts inequality", sbp_inequality},
    };
    int failures = 0;
    for (const Criterion& c : criteria) {
        // Criterion 9 samples the region computed by criterion 5.
        if (only != 0 && c.id != only && !(only == 9 && c.id == 5)) continue;
        Outcome o;
        try {
            o = c.fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += !o.pass;
        std::printf("[%s] %d  %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
        std::fflush(stdout);
        if (c.id == 2) entropy_decay_other_runs();
    }
    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
