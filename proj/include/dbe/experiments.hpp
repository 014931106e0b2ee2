#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dbe/bakry_emery.hpp"
#include "dbe/functionals.hpp"
#include "dbe/inequality_lab.hpp"
#include "dbe/solver.hpp"

namespace dbe::experiments {

/// Raised for malformed scenario files or overrides.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A solver failure annotated with the run that produced it.
class RunError : public std::runtime_error {
public:
    RunError(const std::string& msg, std::size_t n_cells, double tau)
        : std::runtime_error(msg), n_cells_(n_cells), tau_(tau) {}
    std::size_t n_cells() const noexcept { return n_cells_; }
    double tau() const noexcept { return tau_; }

private:
    std::size_t n_cells_;
    double tau_;
};

inline std::string format_double(double x) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
    return std::string(buf, r.ptr);
}

struct Scenario {
    std::string name = "scenario";
    double alpha = 2.0;
    double beta = 0.5;
    InitialCase init = InitialCase::fast;
    double eps = 0.25;
    std::vector<std::size_t> grid_sizes{64, 128, 256};
    std::vector<double> time_steps{1e-5, 1e-4};
    /// Fixed step count for every (N, tau); when absent, round(t_final / tau).
    std::optional<std::size_t> n_steps;
    std::optional<double> t_final;
    SolverOptions solver;

    static Scenario fast_default() {
        Scenario s;
        s.name = "fast";
        return s;
    }

    static Scenario slow_default() {
        Scenario s;
        s.name = "slow";
        s.alpha = 3.0;
        s.beta = 4.0;
        s.init = InitialCase::slow;
        return s;
    }

    static double default_final_time(InitialCase c) {
        return c == InitialCase::slow ? BarenblattProfile::slow_t_end : 0.05;
    }

    double final_time() const { return t_final.value_or(default_final_time(init)); }

    std::size_t steps_for(double tau) const {
        if (n_steps) return *n_steps;
        return static_cast<std::size_t>(std::llround(final_time() / tau));
    }

    void validate() const {
        if (name.empty()) throw ConfigError("scenario: name must not be empty");
        for (char ch : name) {
            const bool ok = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || (ch >= '0' && ch <= '9') ||
                            ch == '_' || ch == '-' || ch == '.';
            if (!ok) throw ConfigError("scenario: name '" + name + "' may only contain [A-Za-z0-9_.-]");
        }
        SchemeParams{alpha, beta, 1.0}.validate();
        BarenblattProfile::make(beta, init);
        if (!(eps > 0.0 && eps <= 1.0)) throw ConfigError("scenario: eps must lie in (0, 1]");
        if (grid_sizes.empty() || time_steps.empty()) {
            throw ConfigError("scenario: need at least one grid size and one time step");
        }
        for (std::size_t n : grid_sizes) {
            if (n < 2) throw ConfigError("scenario: grid sizes must be >= 2");
        }
        for (double tau : time_steps) {
            if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("scenario: time steps must be > 0");
        }
        if (t_final && !(*t_final > 0.0)) throw ConfigError("scenario: t_final must be > 0");
        solver.validate();
        if (init == InitialCase::slow) {
            const double t_end = BarenblattProfile::slow_t_end;
            for (double tau : time_steps) {
                if (static_cast<double>(steps_for(tau)) * tau > t_end * (1.0 + 1e-12)) {
                    throw ConfigError("scenario: n_steps * tau = " +
                                      format_double(static_cast<double>(steps_for(tau)) * tau) +
                                      " exceeds t_end = " + format_double(t_end) +
                                      " for the slow case (tau = " + format_double(tau) + ")");
                }
            }
        }
    }

    /// Applies one key=value setting. Throws ConfigError for unknown keys or bad values.
    void apply(std::string_view key, std::string_view value);
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::string_view unquote(std::string_view s) {
    s = trim(s);
    if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) {
        return s.substr(1, s.size() - 2);
    }
    return s;
}

inline double parse_double(std::string_view key, std::string_view text) {
    text = trim(text);
    double v = 0.0;
    const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || r.ec != std::errc{} || r.ptr != text.data() + text.size() || !std::isfinite(v)) {
        throw ConfigError("key '" + std::string(key) + "': '" + std::string(text) + "' is not a number");
    }
    return v;
}

inline std::size_t parse_count(std::string_view key, std::string_view text) {
    text = trim(text);
    std::size_t v = 0;
    const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || r.ec != std::errc{} || r.ptr != text.data() + text.size()) {
        throw ConfigError("key '" + std::string(key) + "': '" + std::string(text) +
                          "' is not a nonnegative integer");
    }
    return v;
}

/// `[a, b, c]` or `a,b,c`.
inline std::vector<std::string_view> split_list(std::string_view key, std::string_view text) {
    text = trim(text);
    if (!text.empty() && text.front() == '[') {
        if (text.back() != ']') throw ConfigError("key '" + std::string(key) + "': unterminated list");
        text = text.substr(1, text.size() - 2);
    }
    std::vector<std::string_view> out;
    while (true) {
        const auto comma = text.find(',');
        const std::string_view item = trim(text.substr(0, comma));
        if (item.empty()) throw ConfigError("key '" + std::string(key) + "': empty list entry");
        out.push_back(item);
        if (comma == std::string_view::npos) break;
        text = text.substr(comma + 1);
    }
    return out;
}

}  // namespace detail

inline void Scenario::apply(std::string_view key, std::string_view value) {
    using namespace detail;
    const std::string k(trim(key));
    if (k == "name") {
        name = std::string(unquote(value));
    } else if (k == "alpha") {
        alpha = parse_double(k, value);
    } else if (k == "beta") {
        beta = parse_double(k, value);
    } else if (k == "case") {
        const std::string_view v = unquote(value);
        if (v == "slow") {
            init = InitialCase::slow;
        } else if (v == "fast") {
            init = InitialCase::fast;
        } else {
            throw ConfigError("key 'case': expected slow or fast, got '" + std::string(v) + "'");
        }
    } else if (k == "eps") {
        eps = parse_double(k, value);
    } else if (k == "N") {
        grid_sizes.clear();
        for (auto item : split_list(k, value)) grid_sizes.push_back(parse_count(k, item));
    } else if (k == "tau") {
        time_steps.clear();
        for (auto item : split_list(k, value)) time_steps.push_back(parse_double(k, item));
    } else if (k == "n_steps") {
        n_steps = parse_count(k, value);
    } else if (k == "t_final") {
        t_final = parse_double(k, value);
    } else if (k == "residual_tol") {
        solver.residual_tol = parse_double(k, value);
    } else if (k == "max_iterations") {
        const std::size_t n = parse_count(k, value);
        if (n > 1000000) throw ConfigError("key 'max_iterations': value too large");
        solver.max_iterations = static_cast<int>(n);
    } else if (k == "damping") {
        solver.damping = parse_double(k, value);
    } else {
        throw ConfigError("unknown key '" + k + "'");
    }
}

/// Splits `key=value`; throws ConfigError when there is no '='.
inline std::pair<std::string, std::string> split_assignment(std::string_view line) {
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
        throw ConfigError("expected key=value, got '" + std::string(line) + "'");
    }
    const std::string_view key = detail::trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("empty key in '" + std::string(line) + "'");
    return {std::string(key), std::string(detail::trim(line.substr(eq + 1)))};
}

/// Flat key=value text. Blank lines and lines starting with '#' are skipped;
/// a trailing `# comment` after a value is removed. Keys may appear once.
/// `case` is applied first so that its defaults never override explicit keys.
inline Scenario parse_scenario(std::istream& in, const std::string& source = "<input>") {
    std::vector<std::pair<std::string, std::string>> entries;
    std::map<std::string, std::size_t> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view s = detail::trim(line);
        if (s.empty() || s.front() == '#') continue;
        const auto hash = s.find(" #");
        if (hash != std::string_view::npos) s = detail::trim(s.substr(0, hash));
        try {
            auto kv = split_assignment(s);
            if (seen.count(kv.first)) throw ConfigError("duplicate key '" + kv.first + "'");
            seen[kv.first] = lineno;
            entries.push_back(std::move(kv));
        } catch (const ConfigError& e) {
            throw ConfigError(source + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    Scenario s;
    auto case_it = std::find_if(entries.begin(), entries.end(), [](auto& kv) { return kv.first == "case"; });
    if (case_it != entries.end()) {
        Scenario probe;
        probe.apply("case", case_it->second);
        s = probe.init == InitialCase::slow ? Scenario::slow_default() : Scenario::fast_default();
    }
    for (const auto& [k, v] : entries) {
        try {
            s.apply(k, v);
        } catch (const ConfigError& e) {
            throw ConfigError(source + ":" + std::to_string(seen[k]) + ": " + e.what());
        }
    }
    return s;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    return parse_scenario(in, path.string());
}

// ---------------------------------------------------------------------------
// Runs
// ---------------------------------------------------------------------------

struct RunArtifact {
    Scenario scenario;
    std::size_t n_cells = 0;
    double tau = 0.0;
    Trajectory trajectory;
    std::vector<FunctionalRecord> records;
    DecayCertificate certificate;
    std::vector<std::filesystem::path> files;
};

inline double trajectory_min_u(const Trajectory& traj) {
    double m = std::numeric_limits<double>::infinity();
    for (const StateV& v : traj.states) {
        for (double x : v.values()) m = std::min(m, pos_pow(x, 1.0 / traj.params.alpha));
    }
    return m;
}

/// Runs one (N, tau) pair: Barenblatt data, simulation, functionals with
/// U = final mass, and the decay certificate.
inline RunArtifact run_single(const Scenario& s, std::size_t n_cells, double tau, const SolverOptions& opts) {
    const GridSpec grid(n_cells);
    const SchemeParams params{s.alpha, s.beta, tau};
    params.validate();
    const StateV v0 = to_v(barenblatt_init(grid, s.beta, s.init), s.alpha);
    const std::size_t steps = s.steps_for(tau);
    RunArtifact art{s, n_cells, tau, Trajectory{grid, params, {v0}, {}}, {}, {}, {}};
    try {
        art.trajectory = simulate(v0, params, steps, opts);
    } catch (const ConvergenceError& e) {
        throw RunError("scenario '" + s.name + "' (N=" + std::to_string(n_cells) + ", tau=" +
                           format_double(tau) + "): " + e.what(),
                       n_cells, tau);
    }
    const double U = total_mass_u(art.trajectory.states.back(), s.alpha);
    art.records = evaluate_trajectory(art.trajectory, U);
    CertificateOptions copts;
    copts.eps = s.eps;
    art.certificate =
        build_certificate(art.records, params, grid, U, trajectory_min_u(art.trajectory), copts);
    art.certificate.theorem_hypotheses_met = ineq::theorem_hypotheses_met(s.alpha, s.beta, s.eps);
    return art;
}

/// One artifact per (N, tau), N outermost, in declaration order.
inline std::vector<RunArtifact> run_scenario(const Scenario& s, const SolverOptions& opts) {
    s.validate();
    std::vector<RunArtifact> out;
    for (std::size_t n : s.grid_sizes) {
        for (double tau : s.time_steps) out.push_back(run_single(s, n, tau, opts));
    }
    return out;
}

inline std::vector<RunArtifact> run_scenario(const Scenario& s) { return run_scenario(s, s.solver); }

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

inline constexpr std::string_view kRunCsvHeader = "k,t,mass_u,mass_v,H,F,P,ENT,residual,newton_iters";

inline void write_run_csv(const RunArtifact& art, std::ostream& os) {
    os << kRunCsvHeader << '\n';
    for (const FunctionalRecord& r : art.records) {
        os << r.step_index << ',' << format_double(r.time) << ',' << format_double(r.mass_u) << ','
           << format_double(r.mass_v) << ',' << format_double(r.entropy_H) << ','
           << format_double(r.fisher_F) << ',' << format_double(r.production_P) << ','
           << format_double(r.rel_entropy) << ',' << format_double(r.residual) << ',' << r.newton_iters
           << '\n';
    }
}

/// Steps whose full profiles are written: about ten evenly spaced steps plus the last.
inline std::vector<std::size_t> profile_steps(std::size_t n_steps) {
    const std::size_t stride = std::max<std::size_t>(1, (n_steps + 9) / 10);
    std::vector<std::size_t> ks;
    for (std::size_t k = 0; k <= n_steps; k += stride) ks.push_back(k);
    if (ks.back() != n_steps) ks.push_back(n_steps);
    return ks;
}

/// Nodal profiles: k,t,i,x,u,v with u = v^{1/alpha}.
inline void write_profile_csv(const RunArtifact& art, std::ostream& os) {
    os << "k,t,i,x,u,v\n";
    const Trajectory& traj = art.trajectory;
    for (std::size_t k : profile_steps(traj.states.size() - 1)) {
        const StateV& v = traj.states[k];
        const double t = static_cast<double>(k) * traj.params.tau;
        for (std::size_t i = 0; i < v.size(); ++i) {
            os << k << ',' << format_double(t) << ',' << i + 1 << ',' << format_double(traj.grid.node(i))
               << ',' << format_double(pos_pow(v[i], 1.0 / traj.params.alpha)) << ','
               << format_double(v[i]) << '\n';
        }
    }
}

inline void write_certificate(const RunArtifact& art, std::ostream& os) {
    os << "scenario=" << art.scenario.name << '\n'
       << "alpha=" << format_double(art.scenario.alpha) << '\n'
       << "beta=" << format_double(art.scenario.beta) << '\n'
       << "N=" << art.n_cells << '\n'
       << "tau=" << format_double(art.tau) << '\n'
       << art.certificate.to_key_value();
}

inline std::string run_stem(const RunArtifact& art) {
    return art.scenario.name + "_N" + std::to_string(art.n_cells) + "_tau" + format_double(art.tau);
}

namespace detail {
template <class Fn>
std::filesystem::path write_file(const std::filesystem::path& path, Fn&& fn) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    fn(out);
    out.flush();
    if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
    return path;
}
}  // namespace detail

/// Writes `<stem>.csv` into `dir` and returns its path.
inline std::filesystem::path emit_csv(const RunArtifact& art, const std::filesystem::path& dir) {
    return detail::write_file(dir / (run_stem(art) + ".csv"), [&](std::ostream& os) { write_run_csv(art, os); });
}

/// Writes the run CSV, the profile CSV and the certificate; records the paths.
inline void emit_all(RunArtifact& art, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    art.files.clear();
    art.files.push_back(emit_csv(art, dir));
    art.files.push_back(detail::write_file(dir / (run_stem(art) + "_profile.csv"),
                                           [&](std::ostream& os) { write_profile_csv(art, os); }));
    art.files.push_back(detail::write_file(dir / (run_stem(art) + "_certificate.txt"),
                                           [&](std::ostream& os) { write_certificate(art, os); }));
}

// ---------------------------------------------------------------------------
// Mass defect
// ---------------------------------------------------------------------------

struct MassDefectRow {
    std::size_t n_cells;
    double tau;
    double defect;  // final mass_u - initial mass_u
};

/// Mass defect at the common final time of the scenario for every (N, tau).
/// An explicit n_steps is ignored so that all runs end at the same time.
inline std::vector<MassDefectRow> mass_defect_study(const Scenario& s) {
    if (s.grid_sizes.size() < 2 || s.time_steps.size() < 2) {
        throw std::invalid_argument("mass_defect_study: need at least two grid sizes and two time steps");
    }
    Scenario common = s;
    common.n_steps.reset();
    common.validate();
    std::vector<MassDefectRow> rows;
    for (std::size_t n : common.grid_sizes) {
        for (double tau : common.time_steps) {
            const RunArtifact art = run_single(common, n, tau, common.solver);
            rows.push_back({n, tau, art.records.back().mass_u - art.records.front().mass_u});
        }
    }
    return rows;
}

inline void write_mass_defect_csv(const std::vector<MassDefectRow>& rows, std::ostream& os) {
    os << "N,tau,defect\n";
    for (const auto& r : rows) os << r.n_cells << ',' << format_double(r.tau) << ',' << format_double(r.defect) << '\n';
}

}  // namespace dbe::experiments
