#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pmdp/exact_solvers.hpp"
#include "pmdp/fast_solver.hpp"
#include "pmdp/monte_carlo.hpp"
#include "pmdp/oracle.hpp"
#include "pmdp/problems.hpp"
#include "pmdp/serialize.hpp"

namespace {

constexpr int kExitSuccess = 0;
constexpr int kExitNoConvergence = 1;
constexpr int kExitInvalidInput = 2;
constexpr int kExitOracleFailure = 3;

/// Solver did not reach the requested tolerance; maps to exit code 1.
struct ConvergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string fmt(double v, const char* spec = "%.9g") {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

std::string fmt_ms(double ms) { return fmt(ms, "%.3g"); }

/// Output sink: stdout by default, a file with --out.
class Sink {
  public:
    explicit Sink(const std::string& path) {
        if (!path.empty()) {
            file_ = std::make_unique<std::ofstream>(path);
            if (!*file_)
                throw std::invalid_argument("cannot open output file " + path);
        }
    }
    std::ostream& stream() { return file_ ? *file_ : std::cout; }

  private:
    std::unique_ptr<std::ofstream> file_;
};

/// Ordered key=value configuration echoed into every output.
class Config {
  public:
    template <typename T> void add(const std::string& key, const T& value) {
        std::ostringstream s;
        s << std::boolalpha << value;
        entries_.emplace_back(key, s.str());
    }
    void add_real(const std::string& key, double value) {
        entries_.emplace_back(key, fmt(value));
    }
    void write_csv_header(std::ostream& out) const {
        for (const auto& [k, v] : entries_)
            out << "# " << k << "=" << v << "\n";
    }
    nlohmann::json to_json() const {
        nlohmann::json j = nlohmann::json::object();
        for (const auto& [k, v] : entries_)
            j[k] = v;
        return j;
    }

  private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

struct CommonFlags {
    std::string output = "csv";
    std::string out_path;
};

void check_output_kind(const std::string& output) {
    if (output != "csv" && output != "json")
        throw std::invalid_argument("--output must be csv or json");
}

/// Pairwise-difference matrix dW_sigma(sigma') = W(sigma') - W(sigma) over
/// the first `bound` states.
std::vector<std::vector<double>> delta_matrix(const std::vector<pmdp::Real>& w,
                                              std::size_t bound) {
    std::vector<std::vector<double>> m(bound, std::vector<double>(bound));
    for (std::size_t i = 0; i < bound; ++i)
        for (std::size_t j = 0; j < bound; ++j)
            m[i][j] = w[j] - w[i];
    return m;
}

void write_matrix_csv(std::ostream& out,
                      const std::vector<std::string>& labels,
                      const std::vector<std::vector<double>>& m) {
    out << "sigma";
    for (const auto& l : labels)
        out << "," << l;
    out << "\n";
    for (std::size_t i = 0; i < m.size(); ++i) {
        out << labels[i];
        for (double v : m[i])
            out << "," << fmt(v);
        out << "\n";
    }
}

struct SolveFlags {
    bool relative = false;
    double gamma = 0.95;
    double epsilon = -1;
    int max_iters = 10000;
    int samples = 0;
    std::uint64_t seed = 1;
    int threads = 1;
};

/// Shared body of solve-cards and solve-lra: exact or sampled solve, then
/// the pairwise value-difference table.
int run_solve(const pmdp::PseudoMdp& pmdp, const SolveFlags& flags,
              const CommonFlags& common, Config& config,
              const std::vector<std::string>& labels,
              double* gain_out = nullptr) {
    using namespace pmdp;
    check_output_kind(common.output);

    std::vector<Real> w;
    double gain = 0;
    SolveDiagnostics diag;
    std::vector<Real> std_error;

    if (flags.samples > 0) {
        if (flags.relative)
            throw std::invalid_argument(
                "--samples solves by Monte Carlo value iteration, which is "
                "discounted only; drop --relative");
        const int sweeps = flags.max_iters == 10000 ? 100 : flags.max_iters;
        const auto result =
            mcvi(pmdp, flags.gamma, flags.samples, sweeps, flags.seed);
        w = result.values.values;
        std_error = result.std_error;
        diag.sweeps = result.sweeps;
        diag.converged = true; // fixed sweep budget; see std errors
    } else {
        FastSolveOptions opt;
        opt.relative = flags.relative;
        opt.discount = flags.relative ? Real(1) : Real(flags.gamma);
        opt.epsilon = flags.epsilon;
        opt.max_iters = flags.max_iters;
        opt.threads = flags.threads;
        const auto result = fast_value_iteration(pmdp, opt);
        diag = result.diag;
        if (!diag.converged)
            throw ConvergenceError(
                "solver did not converge within " +
                std::to_string(flags.max_iters) +
                " sweeps (residual " + fmt(diag.residual) + ")");
        if (flags.relative) {
            w = result.relative_values.values;
            gain = result.relative_values.gain;
        } else {
            w = result.values.values;
        }
    }
    if (gain_out)
        *gain_out = gain;

    config.add("sweeps", diag.sweeps);
    config.add("converged", diag.converged);
    config.add_real("residual", diag.residual);
    if (flags.relative)
        config.add_real("gain", gain);
    if (!std_error.empty()) {
        double max_se = 0;
        for (Real se : std_error)
            max_se = std::max(max_se, static_cast<double>(se));
        config.add_real("max_std_error", max_se);
    }

    const std::size_t bound = labels.size();
    const auto matrix = delta_matrix(w, bound);

    Sink sink(common.out_path);
    if (common.output == "csv") {
        config.write_csv_header(sink.stream());
        write_matrix_csv(sink.stream(), labels, matrix);
    } else {
        nlohmann::json j;
        j["config"] = config.to_json();
        j["labels"] = labels;
        j["delta_matrix"] = matrix;
        j["values"] = w;
        if (flags.relative)
            j["gain"] = gain;
        if (!std_error.empty())
            j["std_error"] = std_error;
        sink.stream() << j.dump(2) << "\n";
    }
    return kExitSuccess;
}

void add_solve_flags(CLI::App* cmd, SolveFlags& flags, CommonFlags& common) {
    cmd->add_flag("--relative", flags.relative,
                  "discount-free relative value iteration");
    cmd->add_option("--gamma", flags.gamma,
                    "discount factor for the non-relative mode")
        ->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--epsilon", flags.epsilon,
                    "convergence tolerance (default 1e-9, 1e-6 relative)");
    cmd->add_option("--max-iters", flags.max_iters, "sweep budget")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--samples", flags.samples,
                    "solve by sampled sweeps with this many draws per state");
    cmd->add_option("--seed", flags.seed, "sampling seed");
    cmd->add_option("--threads", flags.threads, "worker threads per sweep")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--output", common.output, "csv or json");
    cmd->add_option("--out", common.out_path, "write to this file");
}

int cmd_solve_cards(const SolveFlags& flags, const CommonFlags& common) {
    using namespace pmdp;
    Config config;
    config.add("command", std::string("solve-cards"));
    config.add("relative", flags.relative);
    if (!flags.relative)
        config.add_real("gamma", flags.gamma);
    config.add_real("epsilon", flags.epsilon > 0
                                   ? flags.epsilon
                                   : (flags.relative ? 1e-6 : 1e-9));
    config.add("max_iters", flags.max_iters);
    config.add("threads", flags.threads);
    if (flags.samples > 0) {
        config.add("samples", flags.samples);
        config.add("seed", flags.seed);
    }

    const auto cards = card_game_pmdp();
    std::vector<std::string> labels;
    for (int s = 0; s < 4; ++s)
        labels.push_back(card_color_name(s));
    return run_solve(cards, flags, common, config, labels);
}

int cmd_solve_lra(int kappa, double stake, int sigma_cap,
                  const SolveFlags& flags, const CommonFlags& common) {
    using namespace pmdp;
    Config config;
    config.add("command", std::string("solve-lra"));
    config.add("kappa", kappa);
    config.add_real("stake", stake);
    config.add("sigma_cap", sigma_cap);
    config.add("relative", flags.relative);
    if (!flags.relative)
        config.add_real("gamma", flags.gamma);
    config.add_real("epsilon", flags.epsilon > 0
                                   ? flags.epsilon
                                   : (flags.relative ? 1e-6 : 1e-9));
    config.add("max_iters", flags.max_iters);
    config.add("threads", flags.threads);
    if (flags.samples > 0) {
        config.add("samples", flags.samples);
        config.add("seed", flags.seed);
    }

    const auto pmdp = lra_pmdp({kappa, stake, sigma_cap});
    const std::size_t bound =
        std::min<std::size_t>(static_cast<std::size_t>(pmdp.num_sigma()), 9);
    std::vector<std::string> labels;
    for (std::size_t s = 0; s < bound; ++s)
        labels.push_back(std::to_string(s));
    return run_solve(pmdp, flags, common, config, labels);
}

int cmd_bench(const std::vector<int>& kappa_list, int sweeps, int warmup,
              int threads, const CommonFlags& common) {
    using namespace pmdp;
    check_output_kind(common.output);
    if (kappa_list.empty())
        throw std::invalid_argument("--kappa-list must not be empty");
    for (std::size_t i = 1; i < kappa_list.size(); ++i)
        if (kappa_list[i] <= kappa_list[i - 1])
            throw std::invalid_argument("--kappa-list must be ascending");
    if (sweeps < 5)
        throw std::invalid_argument("bench needs at least 5 timed sweeps");
    if (warmup < 2)
        throw std::invalid_argument("bench needs at least 2 warm-up sweeps");

    const double stake = 0.2; // per-sweep cost depends on kappa only

    Config config;
    config.add("command", std::string("bench"));
    {
        std::ostringstream list;
        for (std::size_t i = 0; i < kappa_list.size(); ++i)
            list << (i ? "," : "") << kappa_list[i];
        config.add("kappa_list", list.str());
    }
    config.add("sweeps", sweeps);
    config.add("warmup", warmup);
    config.add("threads", threads);
    config.add_real("stake", stake);

    struct Record {
        int kappa;
        double mean_ms, grid_ms, single_ms, doubling_ms;
        std::optional<double> log2_ratio;
    };
    std::vector<Record> records;

    double prev_mean = 0;
    for (int kappa : kappa_list) {
        const auto pmdp = lra_pmdp({kappa, stake, -1});
        std::vector<Real> w(pmdp.num_sigma(), Real(0));
        const auto sweep_once = [&](FastSweepStats* stats) {
            auto next = fast_bellman(pmdp, w, Real(1), threads, stats);
            const Real offset = next[0]; // recentre so iterates stay bounded
            for (Real& v : next)
                v -= offset;
            w = std::move(next);
        };
        for (int i = 0; i < warmup; ++i)
            sweep_once(nullptr);

        double total = 0, grid = 0, single = 0, doubling = 0;
        for (int i = 0; i < sweeps; ++i) {
            FastSweepStats stats;
            const auto start = std::chrono::steady_clock::now();
            sweep_once(&stats);
            total += std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - start)
                         .count();
            grid += stats.grid_seconds;
            single += stats.single_draw_seconds;
            doubling += stats.doubling_seconds;
        }
        Record r;
        r.kappa = kappa;
        r.mean_ms = total / sweeps * 1e3;
        r.grid_ms = grid / sweeps * 1e3;
        r.single_ms = single / sweeps * 1e3;
        r.doubling_ms = doubling / sweeps * 1e3;
        if (!records.empty())
            r.log2_ratio = std::log2(r.mean_ms / prev_mean);
        prev_mean = r.mean_ms;
        records.push_back(r);
    }

    Sink sink(common.out_path);
    if (common.output == "csv") {
        config.write_csv_header(sink.stream());
        sink.stream()
            << "kappa,mean_iter_ms,log2_ratio,grid_ms,single_draw_ms,"
               "doubling_ms\n";
        for (const auto& r : records) {
            sink.stream() << r.kappa << "," << fmt_ms(r.mean_ms) << ",";
            if (r.log2_ratio)
                sink.stream() << fmt(*r.log2_ratio, "%.4g");
            sink.stream() << "," << fmt_ms(r.grid_ms) << ","
                          << fmt_ms(r.single_ms) << ","
                          << fmt_ms(r.doubling_ms) << "\n";
        }
    } else {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& r : records) {
            nlohmann::json row;
            row["kappa"] = r.kappa;
            row["mean_iter_ms"] = r.mean_ms;
            if (r.log2_ratio)
                row["log2_ratio"] = *r.log2_ratio;
            else
                row["log2_ratio"] = nullptr;
            row["grid_ms"] = r.grid_ms;
            row["single_draw_ms"] = r.single_ms;
            row["doubling_ms"] = r.doubling_ms;
            rows.push_back(std::move(row));
        }
        nlohmann::json j;
        j["config"] = config.to_json();
        j["records"] = std::move(rows);
        sink.stream() << j.dump(2) << "\n";
    }
    return kExitSuccess;
}

int cmd_compare(int kappa, std::vector<double> stakes, std::uint64_t steps,
                std::uint64_t seed, int sigma_cap, double epsilon,
                int max_iters, const CommonFlags& common) {
    using namespace pmdp;
    check_output_kind(common.output);
    if (stakes.empty())
        stakes = {0.1, 0.2, 0.3, 0.4};
    for (double s : stakes)
        if (!(s > 0.0 && s < 0.5))
            throw std::invalid_argument(
                "every stake must lie strictly in (0, 0.5); got " + fmt(s));

    Config config;
    config.add("command", std::string("compare"));
    config.add("kappa", kappa);
    {
        std::ostringstream list;
        for (std::size_t i = 0; i < stakes.size(); ++i)
            list << (i ? "," : "") << fmt(stakes[i]);
        config.add("stakes", list.str());
    }
    config.add("steps", steps);
    config.add("seed", seed);
    config.add("sigma_cap", sigma_cap);
    config.add_real("epsilon", epsilon > 0 ? epsilon : 1e-6);
    config.add("max_iters", max_iters);

    struct Row {
        double stake;
        const char* strategy;
        double normalized, std_error;
    };
    std::vector<Row> rows;

    for (std::size_t i = 0; i < stakes.size(); ++i) {
        const double stake = stakes[i];
        const auto pmdp = lra_pmdp({kappa, stake, -1});
        FastSolveOptions opt;
        opt.relative = true;
        opt.epsilon = epsilon;
        opt.max_iters = max_iters;
        const auto solved = fast_value_iteration(pmdp, opt);
        if (!solved.diag.converged)
            throw ConvergenceError("relative solve at stake " + fmt(stake) +
                                   " did not converge");

        SimulationOptions sim;
        sim.steps = steps;
        sim.sigma_cap = sigma_cap;
        // One substream per stake, shared by all four rules: common random
        // numbers make the within-stake comparison tighter.
        sim.seed = substream_seed(seed, static_cast<std::uint64_t>(i));
        for (SelectionRule rule :
             {SelectionRule::optimal, SelectionRule::myopic,
              SelectionRule::control_max, SelectionRule::honest}) {
            const auto result = simulate_strategy(
                pmdp, rule,
                rule == SelectionRule::optimal
                    ? solved.relative_values.values
                    : std::vector<Real>{},
                sim);
            rows.push_back(
                {stake, selection_rule_name(rule),
                 lra_normalized_gain(result.mean_reward, kappa, stake),
                 result.std_error / kappa});
        }
    }

    Sink sink(common.out_path);
    if (common.output == "csv") {
        config.write_csv_header(sink.stream());
        sink.stream()
            << "stake,strategy,normalized_additional_reward,std_error\n";
        for (const auto& r : rows)
            sink.stream() << fmt(r.stake) << "," << r.strategy << ","
                          << fmt(r.normalized) << "," << fmt(r.std_error)
                          << "\n";
    } else {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& r : rows)
            arr.push_back({{"stake", r.stake},
                           {"strategy", r.strategy},
                           {"normalized_additional_reward", r.normalized},
                           {"std_error", r.std_error}});
        nlohmann::json j;
        j["config"] = config.to_json();
        j["rows"] = std::move(arr);
        sink.stream() << j.dump(2) << "\n";
    }
    return kExitSuccess;
}

int cmd_oracle_check(int instances, std::uint64_t seed, double tolerance,
                     const CommonFlags& common) {
    using namespace pmdp;
    check_output_kind(common.output);
    if (instances < 1 || instances > 100000)
        throw std::invalid_argument(
            "--instances must lie in [1, 100000]");

    Config config;
    config.add("command", std::string("oracle-check"));
    config.add("instances", instances);
    config.add("seed", seed);
    config.add_real("tolerance", tolerance);

    int failed = 0;
    double worst = 0;
    nlohmann::json failures = nlohmann::json::array();
    std::ostringstream failure_text;
    for (int i = 0; i < instances; ++i) {
        const std::uint64_t s = seed + static_cast<std::uint64_t>(i);
        const auto pmdp = random_tiny_pmdp(s);
        const Real discount = Real(0.5) + Real(0.02) * Real(i % 25);
        const auto report = check_solver_agreement(pmdp, discount, tolerance);
        worst = std::max(worst, static_cast<double>(report.max_deviation));
        if (!report.passed) {
            ++failed;
            nlohmann::json f;
            f["seed"] = s;
            f["discount"] = discount;
            f["failures"] = report.failures;
            f["instance"] = pseudo_mdp_to_json(pmdp);
            failures.push_back(f);
            failure_text << "FAIL seed=" << s << " discount=" << fmt(discount)
                         << "\n";
            for (const auto& msg : report.failures)
                failure_text << "  " << msg << "\n";
            failure_text << "  instance: " << pseudo_mdp_to_json(pmdp).dump()
                         << "\n";
        }
    }

    config.add("failed", failed);
    config.add_real("max_deviation", worst);

    Sink sink(common.out_path);
    if (common.output == "csv") {
        config.write_csv_header(sink.stream());
        sink.stream() << "instances,failed,max_deviation\n"
                      << instances << "," << failed << "," << fmt(worst)
                      << "\n"
                      << failure_text.str();
    } else {
        nlohmann::json j;
        j["config"] = config.to_json();
        j["instances"] = instances;
        j["failed"] = failed;
        j["max_deviation"] = worst;
        j["failures"] = std::move(failures);
        sink.stream() << j.dump(2) << "\n";
    }
    return failed == 0 ? kExitSuccess : kExitOracleFailure;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "Solvers and experiments for two-stage draw-then-choose decision "
        "processes"};
    app.require_subcommand(1);

    SolveFlags cards_flags;
    CommonFlags cards_common;
    auto* cards = app.add_subcommand(
        "solve-cards", "solve the four-color card game and print the "
                       "pairwise value-difference table");
    add_solve_flags(cards, cards_flags, cards_common);

    SolveFlags lra_flags;
    CommonFlags lra_common;
    int lra_kappa = 32;
    double lra_stake = 0.2;
    int lra_sigma_cap = -1;
    auto* lra = app.add_subcommand(
        "solve-lra", "solve the last-revealer manipulation chain");
    lra->add_option("--kappa", lra_kappa, "slots per epoch")
        ->check(CLI::Range(1, 1023));
    lra->add_option("--stake", lra_stake, "adversary stake in (0,1)");
    lra->add_option("--sigma-cap", lra_sigma_cap,
                    "truncate the modeled tail length (default kappa)");
    add_solve_flags(lra, lra_flags, lra_common);

    CommonFlags bench_common;
    std::vector<int> bench_kappas{32, 64, 128, 256, 512};
    int bench_sweeps = 5;
    int bench_warmup = 2;
    int bench_threads = 1;
    auto* bench = app.add_subcommand(
        "bench", "time per-sweep cost across instance sizes");
    bench->add_option("--kappa-list", bench_kappas,
                      "ascending instance sizes")
        ->delimiter(',');
    bench->add_option("--sweeps", bench_sweeps, "timed sweeps (>= 5)");
    bench->add_option("--warmup", bench_warmup, "warm-up sweeps (>= 2)");
    bench->add_option("--threads", bench_threads, "worker threads")
        ->check(CLI::PositiveNumber);
    bench->add_option("--output", bench_common.output, "csv or json");
    bench->add_option("--out", bench_common.out_path, "write to this file");

    CommonFlags cmp_common;
    int cmp_kappa = 32;
    std::vector<double> cmp_stakes;
    std::uint64_t cmp_steps = 1000000;
    std::uint64_t cmp_seed = 1;
    int cmp_sigma_cap = 16;
    double cmp_epsilon = -1;
    int cmp_max_iters = 10000;
    auto* cmp = app.add_subcommand(
        "compare", "simulate selection strategies across stakes");
    cmp->add_option("--kappa", cmp_kappa, "slots per epoch")
        ->check(CLI::Range(1, 1023));
    cmp->add_option("--stake", cmp_stakes,
                    "stakes in (0, 0.5); default 0.1,0.2,0.3,0.4")
        ->delimiter(',');
    cmp->add_option("--steps", cmp_steps, "epochs per (stake, strategy)")
        ->check(CLI::PositiveNumber);
    cmp->add_option("--seed", cmp_seed, "simulation seed");
    cmp->add_option("--sigma-cap", cmp_sigma_cap,
                    "cap per-epoch draws at 2^this")
        ->check(CLI::Range(0, 30));
    cmp->add_option("--epsilon", cmp_epsilon, "solver tolerance");
    cmp->add_option("--max-iters", cmp_max_iters, "solver sweep budget")
        ->check(CLI::PositiveNumber);
    cmp->add_option("--output", cmp_common.output, "csv or json");
    cmp->add_option("--out", cmp_common.out_path, "write to this file");

    CommonFlags oracle_common;
    int oracle_instances = 100;
    std::uint64_t oracle_seed = 1;
    double oracle_tolerance = 1e-8;
    auto* oracle = app.add_subcommand(
        "oracle-check",
        "cross-check every solver path on random tiny instances");
    oracle->add_option("--instances", oracle_instances,
                       "number of random instances");
    oracle->add_option("--seed", oracle_seed, "first instance seed");
    oracle->add_option("--tolerance", oracle_tolerance,
                       "maximum allowed deviation");
    oracle->add_option("--output", oracle_common.output, "csv or json");
    oracle->add_option("--out", oracle_common.out_path,
                       "write to this file");

    try {
        app.parse(argc, argv);
        if (cards->parsed())
            return cmd_solve_cards(cards_flags, cards_common);
        if (lra->parsed())
            return cmd_solve_lra(lra_kappa, lra_stake, lra_sigma_cap,
                                 lra_flags, lra_common);
        if (bench->parsed())
            return cmd_bench(bench_kappas, bench_sweeps, bench_warmup,
                             bench_threads, bench_common);
        if (cmp->parsed())
            return cmd_compare(cmp_kappa, cmp_stakes, cmp_steps, cmp_seed,
                               cmp_sigma_cap, cmp_epsilon, cmp_max_iters,
                               cmp_common);
        if (oracle->parsed())
            return cmd_oracle_check(oracle_instances, oracle_seed,
                                    oracle_tolerance, oracle_common);
        return kExitInvalidInput;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInvalidInput;
    } catch (const ConvergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNoConvergence;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInvalidInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInvalidInput;
    }
}
