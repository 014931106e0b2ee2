#pragma once

// Command-line front end. Every verb validates all of its inputs before the
// output directory is touched, so a rejected invocation leaves no files behind.

#include <CLI11.hpp>

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dbe/experiments.hpp"
#include "dbe/inequality_lab.hpp"

namespace dbe::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// key=value overrides for verbs without a scenario file.
class KeyValues {
public:
    KeyValues(const std::vector<std::string>& items, std::set<std::string> allowed) : allowed_(std::move(allowed)) {
        for (const std::string& item : items) {
            auto [k, v] = experiments::split_assignment(item);
            if (!allowed_.count(k)) throw ValidationError("unknown override key '" + k + "'");
            if (values_.count(k)) throw ValidationError("duplicate override key '" + k + "'");
            values_[k] = v;
        }
    }

    double get(const std::string& key, double fallback) const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : experiments::detail::parse_double(key, it->second);
    }

    std::size_t count(const std::string& key, std::size_t fallback) const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : experiments::detail::parse_count(key, it->second);
    }

    std::string text(const std::string& key, const std::string& fallback) const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

private:
    std::set<std::string> allowed_;
    std::map<std::string, std::string> values_;
};

inline double parse_scalar(const std::string& flag, const std::string& text) {
    try {
        return experiments::detail::parse_double(flag, text);
    } catch (const std::invalid_argument&) {
        throw ValidationError(flag + ": '" + text + "' is not a number");
    }
}

inline ineq::ShiftRule parse_shift(const std::string& text) {
    if (text == "kappa_c") return ineq::ShiftRule::kappa_c;
    if (text == "kappa") return ineq::ShiftRule::kappa;
    throw ValidationError("shift: expected kappa_c or kappa, got '" + text + "'");
}

struct Invocation {
    std::string verb;
    std::string config;
    std::string out = "out";
    std::string eps;
    std::string a;
    std::string b;
    std::string alpha;
    std::string beta;
    unsigned workers = 0;
    std::string tol;
    std::vector<std::string> overrides;
};

// ---------------------------------------------------------------------------
// Verb implementations. `prepare_*` validates and returns the work to run.
// ---------------------------------------------------------------------------

using Job = std::function<void(std::ostream& log)>;

inline experiments::Scenario scenario_from(const Invocation& inv) {
    if (inv.config.empty()) throw ValidationError("--config is required for '" + inv.verb + "'");
    if (!std::filesystem::is_regular_file(inv.config)) {
        throw ValidationError("config file '" + inv.config + "' does not exist");
    }
    experiments::Scenario s = experiments::load_scenario(inv.config);
    for (const std::string& item : inv.overrides) {
        auto [k, v] = experiments::split_assignment(item);
        s.apply(k, v);
    }
    if (!inv.eps.empty()) s.eps = parse_scalar("--eps", inv.eps);
    if (!inv.alpha.empty()) s.alpha = parse_scalar("--alpha", inv.alpha);
    if (!inv.beta.empty()) s.beta = parse_scalar("--beta", inv.beta);
    if (!inv.tol.empty()) s.solver.residual_tol = parse_scalar("--tol", inv.tol);
    s.validate();
    return s;
}

inline void require_unused(const Invocation& inv, std::initializer_list<std::pair<const char*, const std::string*>> flags) {
    for (auto [name, value] : flags) {
        if (!value->empty()) throw ValidationError(std::string(name) + " is not used by '" + inv.verb + "'");
    }
}

inline Job prepare_simulate(const Invocation& inv) {
    require_unused(inv, {{"--a", &inv.a}, {"--b", &inv.b}});
    const experiments::Scenario s = scenario_from(inv);
    const std::filesystem::path out = inv.out;
    return [s, out](std::ostream& log) {
        for (std::size_t n : s.grid_sizes) {
            for (double tau : s.time_steps) {
                experiments::RunArtifact art = experiments::run_single(s, n, tau, s.solver);
                experiments::emit_all(art, out);
                log << "simulate: " << experiments::run_stem(art) << " steps=" << art.records.size() - 1
                    << " bound_pass=" << (art.certificate.bound_pass ? "true" : "false") << '\n';
            }
        }
    };
}

inline Job prepare_analyze(const Invocation& inv) {
    require_unused(inv, {{"--a", &inv.a}, {"--b", &inv.b}});
    const experiments::Scenario s = scenario_from(inv);
    const std::filesystem::path out = inv.out;
    return [s, out](std::ostream& log) {
        std::filesystem::create_directories(out);
        std::vector<experiments::MassDefectRow> rows;
        for (std::size_t n : s.grid_sizes) {
            for (double tau : s.time_steps) {
                const experiments::RunArtifact art = experiments::run_single(s, n, tau, s.solver);
                experiments::detail::write_file(out / (experiments::run_stem(art) + "_certificate.txt"),
                                                [&](std::ostream& os) { experiments::write_certificate(art, os); });
                rows.push_back({n, tau, art.records.back().mass_u - art.records.front().mass_u});
                log << "analyze: " << experiments::run_stem(art)
                    << " a1=" << (art.certificate.a1_pass ? "pass" : "fail")
                    << " a2=" << (art.certificate.a2_pass ? "pass" : "fail")
                    << " bound=" << (art.certificate.bound_pass ? "pass" : "fail") << '\n';
            }
        }
        experiments::detail::write_file(out / (s.name + "_mass_defect.csv"),
                                        [&](std::ostream& os) { experiments::write_mass_defect_csv(rows, os); });
    };
}

inline ineq::ScanOptions scan_options(const Invocation& inv, const KeyValues& kv) {
    ineq::ScanOptions o;
    o.workers = inv.workers;
    if (!inv.tol.empty()) o.tol = parse_scalar("--tol", inv.tol);
    if (!(o.tol >= 0.0)) throw ValidationError("--tol must be >= 0");
    o.domain.lo = kv.get("lo", o.domain.lo);
    o.domain.hi = kv.get("hi", o.domain.hi);
    o.domain.log_points = kv.count("log_points", o.domain.log_points);
    o.domain.patch_points = kv.count("patch_points", o.domain.patch_points);
    o.domain.patch_halfwidth = kv.get("patch_halfwidth", o.domain.patch_halfwidth);
    o.shift = parse_shift(kv.text("shift", "kappa_c"));
    o.domain.validate();
    return o;
}

inline const std::set<std::string> kScanKeys{"lo", "hi", "log_points", "patch_points", "patch_halfwidth", "shift"};

inline double eps_from(const Invocation& inv, double fallback) {
    const double eps = inv.eps.empty() ? fallback : parse_scalar("--eps", inv.eps);
    if (!(eps > 0.0 && eps <= 1.0)) throw ValidationError("--eps must lie in (0, 1]");
    return eps;
}

inline ineq::AxisRange range_from(const std::string& flag, const std::string& text, const char* fallback) {
    try {
        return ineq::AxisRange::parse(text.empty() ? fallback : text);
    } catch (const std::invalid_argument& e) {
        throw ValidationError(flag + ": " + e.what());
    }
}

inline Job prepare_scan(const Invocation& inv, ineq::ScanAxes axes) {
    if (!inv.config.empty()) throw ValidationError("--config is not used by '" + inv.verb + "'");
    const KeyValues kv(inv.overrides, kScanKeys);
    const ineq::ScanOptions opts = scan_options(inv, kv);
    const double eps = eps_from(inv, 0.25);
    ineq::AxisRange r1, r2;
    if (axes == ineq::ScanAxes::ab) {
        require_unused(inv, {{"--alpha", &inv.alpha}, {"--beta", &inv.beta}});
        r1 = range_from("--a", inv.a, "0:3:150");
        r2 = range_from("--b", inv.b, "-2:6:200");
    } else {
        require_unused(inv, {{"--a", &inv.a}, {"--b", &inv.b}});
        r1 = range_from("--alpha", inv.alpha, "0:4:100");
        r2 = range_from("--beta", inv.beta, "0:4:100");
    }
    const std::filesystem::path out = inv.out;
    return [=](std::ostream& log) {
        const ineq::RegionScan scan = axes == ineq::ScanAxes::ab ? ineq::region_scan_ab(r1, r2, eps, opts)
                                                                 : ineq::region_scan_alphabeta(r1, r2, eps, opts);
        std::filesystem::create_directories(out);
        const std::string stem = (axes == ineq::ScanAxes::ab ? "region_ab_eps" : "region_alphabeta_eps") +
                                 experiments::format_double(eps);
        experiments::detail::write_file(out / (stem + ".csv"), [&](std::ostream& os) { scan.write_csv(os); });
        std::size_t admissible = 0, suspect = 0;
        for (const auto& c : scan.cells) {
            admissible += c.admissible() ? 1 : 0;
            suspect += c.verdict == ineq::Verdict::boundary_suspect ? 1 : 0;
        }
        log << inv.verb << ": " << scan.cells.size() << " cells, " << admissible << " admissible ("
            << suspect << " boundary_suspect)\n";
    };
}

inline ineq::ABPoint point_from(const Invocation& inv) {
    if (inv.a.empty() || inv.b.empty()) throw ValidationError("--a and --b are required for '" + inv.verb + "'");
    return {parse_scalar("--a", inv.a), parse_scalar("--b", inv.b)};
}

inline Job prepare_check_sbp(const Invocation& inv) {
    if (!inv.config.empty()) throw ValidationError("--config is not used by 'check-sbp'");
    require_unused(inv, {{"--alpha", &inv.alpha}, {"--beta", &inv.beta}});
    const KeyValues kv(inv.overrides, {"samples", "N", "delta", "seed", "mode", "zero_prob", "kappa"});
    const ineq::ABPoint ab = point_from(inv);
    const double eps = eps_from(inv, 1.0);
    const double kappa = kv.get("kappa", eps * ab.A);
    const double tol = inv.tol.empty() ? 0.0 : parse_scalar("--tol", inv.tol);
    const std::size_t samples = kv.count("samples", 1000);
    const std::size_t n = kv.count("N", 16);
    const double delta = kv.get("delta", 0.05);
    const std::size_t seed = kv.count("seed", 12345);
    const std::string mode = kv.text("mode", "near");
    const double zero_prob = kv.get("zero_prob", 0.1);
    if (!(kappa >= 0.0)) throw ValidationError("kappa must be >= 0");
    if (!(tol >= 0.0)) throw ValidationError("--tol must be >= 0");
    if (n < 2) throw ValidationError("N must be >= 2");
    if (mode != "near" && mode != "random") throw ValidationError("mode must be near or random");
    if (mode == "near" && !(delta >= 0.0 && delta < 1.0)) throw ValidationError("delta must lie in [0, 1)");
    if (!(zero_prob >= 0.0 && zero_prob <= 1.0)) throw ValidationError("zero_prob must lie in [0, 1]");
    if (mode == "random" && zero_prob > 0.0 && (ab.B < 0.0 || ab.A + ab.B < 1.0 || !(ab.A > 0.0))) {
        throw ValidationError("vectors with zeros need A > 0, B >= 0 and A + B >= 1 (set zero_prob=0)");
    }
    const std::filesystem::path out = inv.out;
    return [=](std::ostream& log) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> near(1.0 - delta, 1.0 + delta);
        std::uniform_real_distribution<double> wide(0.0, 2.0);
        std::bernoulli_distribution zero(zero_prob);
        std::ostringstream bad;
        bad << "sample,i,w,lhs,rhs\n";
        std::size_t failures = 0;
        double worst = std::numeric_limits<double>::infinity();
        std::vector<double> w(n);
        for (std::size_t s = 0; s < samples; ++s) {
            for (double& x : w) {
                if (mode == "near") {
                    x = near(rng);
                } else {
                    x = zero(rng) ? 0.0 : wide(rng);
                }
            }
            const ineq::SbpCheck r = ineq::sbp_inequality_check(w, ab, kappa, tol);
            const double m = r.lhs - r.rhs;
            worst = std::min(worst, m);
            if (!r.holds) {
                ++failures;
                for (std::size_t i = 0; i < n; ++i) {
                    bad << s << ',' << i << ',' << experiments::format_double(w[i]) << ','
                        << experiments::format_double(r.lhs) << ',' << experiments::format_double(r.rhs) << '\n';
                }
            }
        }
        std::filesystem::create_directories(out);
        experiments::detail::write_file(out / "sbp_check.txt", [&](std::ostream& os) {
            os << "A=" << experiments::format_double(ab.A) << "\nB=" << experiments::format_double(ab.B)
               << "\nkappa=" << experiments::format_double(kappa) << "\nsamples=" << samples << "\nN=" << n
               << "\nmode=" << mode << "\nfailures=" << failures
               << "\nmin_lhs_minus_rhs=" << experiments::format_double(worst) << '\n';
        });
        experiments::detail::write_file(out / "sbp_counterexamples.csv", [&](std::ostream& os) { os << bad.str(); });
        log << "check-sbp: " << samples << " samples, " << failures << " failures\n";
    };
}

inline Job prepare_check_local(const Invocation& inv) {
    if (!inv.config.empty()) throw ValidationError("--config is not used by 'check-local'");
    require_unused(inv, {{"--alpha", &inv.alpha}, {"--beta", &inv.beta}});
    const KeyValues kv(inv.overrides, {"u", "v", "h0", "levels", "kappa", "c"});
    const ineq::ABPoint ab = point_from(inv);
    double kappa = 0.0;
    if (kv.has("kappa")) {
        kappa = kv.get("kappa", 0.0);
    } else {
        try {
            kappa = ineq::kappa_c(ab);
        } catch (const std::domain_error& e) {
            throw ValidationError(std::string(e.what()) + "; pass kappa=... explicitly");
        }
    }
    const double c = kv.get("c", ineq::c_shift(ab, kappa));
    const double u = kv.get("u", 1.0);
    const double v = kv.get("v", 1.0);
    const double h0 = kv.get("h0", 1e-2);
    const std::size_t levels = kv.count("levels", 8);
    if (!(h0 > 0.0)) throw ValidationError("h0 must be > 0");
    if (levels < 2 || levels > 60) throw ValidationError("levels must lie in [2, 60]");
    std::vector<double> hs(levels);
    for (std::size_t j = 0; j < levels; ++j) hs[j] = std::ldexp(h0, -static_cast<int>(j));
    if (!(1.0 - h0 * std::abs(v) + h0 * h0 * u / 2.0 > 0.0) || !(1.0 + h0 * std::abs(v) + h0 * h0 * u / 2.0 > 0.0)) {
        throw ValidationError("h0 too large: X or Y would be nonpositive");
    }
    const std::filesystem::path out = inv.out;
    return [=](std::ostream& log) {
        const ineq::LocalExpansionReport rep =
            ineq::local_expansion_check(ab, kappa, c, ineq::canonical_rho(ab), u, v, hs);
        std::filesystem::create_directories(out);
        experiments::detail::write_file(out / "local_expansion.csv", [&](std::ostream& os) {
            os << "h,T_over_h4,limit,error\n";
            for (std::size_t j = 0; j < rep.h.size(); ++j) {
                os << experiments::format_double(rep.h[j]) << ',' << experiments::format_double(rep.scaled[j]) << ','
                   << experiments::format_double(rep.limit) << ',' << experiments::format_double(rep.error[j]) << '\n';
            }
        });
        log << "check-local: limit=" << experiments::format_double(rep.limit)
            << " observed_order=" << experiments::format_double(rep.observed_order) << '\n';
    };
}

inline Job prepare(const Invocation& inv) {
    if (inv.verb == "simulate") return prepare_simulate(inv);
    if (inv.verb == "analyze") return prepare_analyze(inv);
    if (inv.verb == "scan-ab") return prepare_scan(inv, ineq::ScanAxes::ab);
    if (inv.verb == "scan-alphabeta") return prepare_scan(inv, ineq::ScanAxes::alphabeta);
    if (inv.verb == "check-sbp") return prepare_check_sbp(inv);
    if (inv.verb == "check-local") return prepare_check_local(inv);
    throw ValidationError("unknown verb '" + inv.verb + "'");
}

// ---------------------------------------------------------------------------
// Argument parsing and dispatch
// ---------------------------------------------------------------------------

inline const std::vector<std::pair<std::string, std::string>> kVerbs{
    {"simulate", "run a scenario and write run CSVs, profiles and certificates"},
    {"analyze", "run a scenario and write certificates and the mass defect table"},
    {"scan-ab", "scan the admissible region in (A, B)"},
    {"scan-alphabeta", "scan the admissible region in (alpha, beta)"},
    {"check-sbp", "test the discrete summation-by-parts inequality on random vectors"},
    {"check-local", "compare T near (1,1) with its quartic expansion"},
};

/// Help for the subcommand being parsed, or for the whole program.
inline std::string help_for(const CLI::App& app) {
    const auto subs = app.get_subcommands();
    return subs.empty() ? app.help() : subs.front()->help();
}

inline int dispatch(int argc, const char* const* argv, std::ostream& err) {
    CLI::App app{"Discrete entropy-decay laboratory for the implicit porous-medium scheme", "dbe_cli"};
    app.require_subcommand(1, 1);
    Invocation inv;
    for (const auto& [verb, help] : kVerbs) {
        CLI::App* sub = app.add_subcommand(verb, help);
        sub->add_option("--config", inv.config, "scenario file (key=value lines)");
        sub->add_option("--out", inv.out, "output directory")->capture_default_str();
        sub->add_option("--eps", inv.eps, "kappa = eps * A, eps in (0, 1]");
        sub->add_option("--a", inv.a, "A range lo:hi:count (scans) or value (checks)");
        sub->add_option("--b", inv.b, "B range lo:hi:count (scans) or value (checks)");
        sub->add_option("--alpha", inv.alpha, "alpha range (scan-alphabeta) or value (scenarios)");
        sub->add_option("--beta", inv.beta, "beta range (scan-alphabeta) or value (scenarios)");
        sub->add_option("--workers", inv.workers, "worker threads for scans (0 = all cores)");
        sub->add_option("--tol", inv.tol, "tolerance (solver residual, scan or inequality slack)");
        sub->add_option("overrides", inv.overrides, "key=value overrides");
        sub->callback([&inv, sub] { inv.verb = sub->get_name(); });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        err << help_for(app);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << help_for(app);
        return kExitValidation;
    }

    Job job;
    try {
        job = prepare(inv);
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n\n" << app.get_subcommand(inv.verb)->help();
        return kExitValidation;
    } catch (const std::domain_error& e) {
        err << "error: " << e.what() << "\n\n" << app.get_subcommand(inv.verb)->help();
        return kExitValidation;
    }

    try {
        job(err);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitOk;
}

}  // namespace dbe::cli
