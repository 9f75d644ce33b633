#include "mmrm/cli.hpp"

#include "mmrm/design.hpp"
#include "mmrm/errors.hpp"
#include "mmrm/reml.hpp"
#include "mmrm/scenarios.hpp"
#include "mmrm/simulate.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

namespace mmrm {

namespace {

using nlohmann::json;

std::string fmt(const char* format, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, format, v);
    return buf;
}

std::string sig4(double v) { return fmt("%.4g", v); }

const std::map<std::string, MonotoneStrategy>& strategy_names() {
    static const std::map<std::string, MonotoneStrategy> m{{"exclude", MonotoneStrategy::ExcludeSubjects},
                                                           {"truncate", MonotoneStrategy::TruncateAtFirstGap},
                                                           {"impute", MonotoneStrategy::RegressionImpute}};
    return m;
}

std::string strategy_label(std::optional<MonotoneStrategy> s) {
    if (!s) return "none";
    for (const auto& [name, value] : strategy_names()) {
        if (value == *s) return name;
    }
    return "none";
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace

AnalysisReport analyze_records(const CsvData& csv, std::optional<MonotoneStrategy> strategy, InfoMode mode,
                               const std::string& digest) {
    const MonotoneDataset data =
        strategy ? monotonize(csv.records, csv.p, *strategy) : validate_monotone(csv.records, csv.p);
    const MmrmFit fit = fit_mmrm(data, ScaleMode::REML);
    const int p = data.visits();
    const int ti = fit.q() - 1;

    AnalysisReport r;
    r.covariate_names = csv.covariate_names;
    r.info_mode = mode;
    r.strategy = strategy_label(strategy);
    r.digest = digest;
    r.n = data.size();
    r.sigma_hat = fit.sigma_hat;
    for (int j = 1; j <= p; ++j) {
        VisitEstimate v;
        v.visit = j;
        v.alpha = fit.alpha.col(j - 1);
        v.tau = fit.tau(j);
        v.se_asymptotic = std::sqrt(phi_p(fit, j)(ti, ti));
        v.se_kr = std::sqrt(kr_variance(fit, mode, j)(ti, ti));
        v.se_delta = std::sqrt(delta_variance(fit, j)(ti, ti));
        r.visits.push_back(std::move(v));
    }
    r.test = wald_test_tau(data, fit, mode, p);
    for (int s = 0; s <= p; ++s) {
        r.pattern_counts.push_back({data.pattern_count(s, 0), data.pattern_count(s, 1)});
    }
    return r;
}

json to_json(const AnalysisReport& r) {
    json visits = json::array();
    for (const auto& v : r.visits) {
        visits.push_back({{"visit", v.visit},
                          {"alpha", std::vector<double>(v.alpha.data(), v.alpha.data() + v.alpha.size())},
                          {"tau", v.tau},
                          {"se", {{"asymptotic", v.se_asymptotic}, {"kr", v.se_kr}, {"delta", v.se_delta}}}});
    }
    json patterns = json::array();
    for (const auto& c : r.pattern_counts) {
        patterns.push_back({c[0], c[1]});
    }
    return json{{"input", {{"fnv1a64", r.digest}, {"n", r.n}, {"patternCounts", patterns}}},
                {"covariates", r.covariate_names},
                {"monotoneStrategy", r.strategy},
                {"infoMode", r.info_mode == InfoMode::Expected ? "expected" : "observed"},
                {"visits", visits},
                {"sigmaHat", to_json(r.sigma_hat)},
                {"test",
                 {{"estimate", r.test.estimate},
                  {"se", r.test.se},
                  {"df", r.test.df},
                  {"statistic", r.test.statistic},
                  {"pValue", r.test.p_value}}}};
}

std::string to_text(const AnalysisReport& r) {
    std::ostringstream o;
    o << "input  fnv1a64=" << r.digest << "  n=" << r.n << "  strategy=" << r.strategy
      << "  info=" << (r.info_mode == InfoMode::Expected ? "expected" : "observed") << "\n";
    o << "patterns (placebo/active):";
    for (std::size_t s = 0; s < r.pattern_counts.size(); ++s) {
        o << "  " << s << ":" << r.pattern_counts[s][0] << "/" << r.pattern_counts[s][1];
    }
    o << "\n\nvisit      tau   se(asym)     se(KR)  se(delta)\n";
    for (const auto& v : r.visits) {
        char line[128];
        std::snprintf(line, sizeof line, "%5d %8s %10s %10s %10s\n", v.visit, sig4(v.tau).c_str(),
                      sig4(v.se_asymptotic).c_str(), sig4(v.se_kr).c_str(), sig4(v.se_delta).c_str());
        o << line;
    }
    o << "\nfixed effects by visit (intercept";
    for (const auto& c : r.covariate_names) o << ", " << c;
    o << ", group)\n";
    for (const auto& v : r.visits) {
        o << "  " << v.visit << ":";
        for (Eigen::Index k = 0; k < v.alpha.size(); ++k) o << " " << sig4(v.alpha(k));
        o << "\n";
    }
    o << "\nSigma_hat\n";
    for (Eigen::Index i = 0; i < r.sigma_hat.rows(); ++i) {
        o << " ";
        for (Eigen::Index k = 0; k < r.sigma_hat.cols(); ++k) o << " " << fmt("%9.4g", r.sigma_hat(i, k));
        o << "\n";
    }
    o << "\ntau at last visit: " << sig4(r.test.estimate) << " (KR SE " << sig4(r.test.se) << "), t = "
      << sig4(r.test.statistic) << " on " << sig4(r.test.df) << " d.f., p = " << sig4(r.test.p_value) << "\n";
    return o.str();
}

namespace {

struct Options {
    std::string data, spec, gen, out = "text", strategy, info = "expected", records, row, tail = "auto";
    std::optional<int> n;
    std::optional<double> variance_n;
    int reps = 1000;
    std::uint64_t seed = 1;
    int workers = 1;
    int table = 2;
    bool no_bisection = false;
    bool inflate_nl = false;
};

InfoMode parse_info(const std::string& s) {
    if (s == "expected") return InfoMode::Expected;
    if (s == "observed") return InfoMode::Observed;
    throw ParseError("--info-mode must be expected or observed");
}

TailMode parse_tail(const std::string& s) {
    if (s == "auto") return TailMode::Auto;
    if (s == "full") return TailMode::FullSum;
    if (s == "simplified") return TailMode::Simplified;
    throw ParseError("--tail must be auto, full or simplified");
}

int cmd_analyze(const Options& o, std::ostream& out) {
    const std::string bytes = read_text_file(o.data);
    std::istringstream in(bytes);
    const CsvData csv = read_csv(in);
    std::optional<MonotoneStrategy> strategy;
    if (!o.strategy.empty()) {
        strategy = strategy_names().at(o.strategy);
    }
    const AnalysisReport r = analyze_records(csv, strategy, parse_info(o.info), fnv1a64_hex(bytes));
    out << (o.out == "json" ? dump(to_json(r)) : to_text(r));
    return kExitOk;
}

int cmd_power(const Options& o, std::ostream& out) {
    const DesignSpec spec = parse_design(read_json_file(o.spec));
    if (!o.n) {
        throw ParseError("power needs --n");
    }
    const PowerResult r = power_exact(*o.n, spec, o.variance_n);
    if (o.out == "json") {
        out << dump(to_json(r));
    } else {
        out << "n = " << *o.n << "  df = " << sig4(r.df) << "  sqrt(n) lambda = " << sig4(r.lambda_sqrt_n)
            << "\nvarpi_tau = " << sig4(r.varpi_tau) << " (at n = " << r.variance_n << ")"
            << "\npower exact = " << fmt("%.2f", 100.0 * r.power_exact) << "%  approx = "
            << fmt("%.2f", 100.0 * r.power_approx) << "%\n";
    }
    return kExitOk;
}

SampleSizeOptions size_options(const Options& o) {
    SampleSizeOptions s;
    s.tail = parse_tail(o.tail);
    s.allow_bisection = !o.no_bisection;
    s.inflate_nl = o.inflate_nl;
    return s;
}

int cmd_samplesize(const Options& o, std::ostream& out) {
    const DesignSpec spec = parse_design(read_json_file(o.spec));
    const SampleSizePlan plan = size_two_step(spec, size_options(o));
    if (o.out == "json") {
        out << dump(to_json(plan));
    } else {
        out << "n_l = " << plan.nl << "  n_u* = " << fmt("%.1f", plan.nu_star) << "  n_u = " << fmt("%.1f", plan.nu)
            << "  f(n_l) = " << sig4(plan.df_at_nl) << "\n";
        out << "two-step n = " << plan.two_step_n << " (power " << fmt("%.2f", 100.0 * plan.two_step_power)
            << "%)\n";
        out << "recommended n = " << plan.final_n << " (" << plan.per_arm[0] << " placebo, " << plan.per_arm[1]
            << " active), nominal power " << fmt("%.2f", 100.0 * plan.nominal_power) << "%"
            << (plan.used_bisection ? ", found by bisection" : "") << "\n";
    }
    return kExitOk;
}

int cmd_simulate(const Options& o, std::ostream& out) {
    const DesignSpec spec = parse_design(read_json_file(o.spec));
    const GenerationSpec gen = parse_generator(read_json_file(o.gen));
    const int n = o.n ? *o.n : size_two_step(spec).final_n;
    ReplicationOptions ro;
    ro.workers = o.workers;
    ro.keep_records = !o.records.empty();
    const ReplicationSummary s = run_replications(gen, AnalysisSettings{spec.alpha, parse_info(o.info)}, n, o.reps,
                                                  o.seed, ro);
    if (!o.records.empty()) {
        std::ofstream f(o.records);
        if (!f) {
            throw ParseError("cannot write '" + o.records + "'");
        }
        f << "index\tfailed\testimate\tse\tdf\trejected\n";
        for (const auto& r : s.records) {
            f << r.index << "\t" << (r.failed ? 1 : 0) << "\t" << fmt("%.17g", r.estimate) << "\t"
              << fmt("%.17g", r.se) << "\t" << fmt("%.17g", r.df) << "\t" << (r.rejected ? 1 : 0) << "\n";
        }
    }
    if (o.out == "json") {
        out << dump(to_json(s));
    } else {
        out << "n = " << s.n << "  reps = " << s.reps << "  seed = " << s.seed << "  failures = " << s.failures
            << "\nsimulated power = " << fmt("%.2f", 100.0 * s.simulated_power) << "% (MC SE "
            << fmt("%.2f", 100.0 * s.mc_se) << ")\nmean estimate = " << sig4(s.mean_estimate)
            << "  sd = " << sig4(s.sd_estimate) << "  mean KR SE = " << sig4(s.mean_se)
            << "  mean df = " << sig4(s.mean_df) << "\n";
    }
    return kExitOk;
}

int cmd_tables(const Options& o, std::ostream& out) {
    const Scenario scenario = scenario_for_table(o.table);
    std::vector<TableRow> rows = table_rows();
    if (!o.row.empty()) {
        const auto comma = o.row.find(',');
        if (comma == std::string::npos) {
            throw ParseError("--row takes <structure>,<tau>");
        }
        const CovarianceCase c = parse_case(o.row.substr(0, comma));
        double tau = 0.0;
        try {
            tau = std::stod(o.row.substr(comma + 1));
        } catch (const std::exception&) {
            throw ParseError("--row tau is not a number");
        }
        std::vector<TableRow> picked;
        for (const auto& r : rows) {
            if (r.covariance == c && r.tau == tau) picked.push_back(r);
        }
        if (picked.empty()) {
            throw ParseError("no table row " + o.row);
        }
        rows = picked;
    }
    SampleSizeOptions so = size_options(o);
    so.allow_bisection = false;  // the tables report the two-step columns
    json all = json::array();
    std::ostringstream text;
    text << "structure       tau   n_l   n_u*    n_u     n  nominal(%)\n";
    for (const auto& r : rows) {
        const DesignSpec spec = scenario_design(scenario, r.covariance, r.tau);
        const SampleSizePlan plan = size_two_step(spec, so);
        json j = to_json(plan);
        j["structure"] = case_name(r.covariance);
        j["tau"] = r.tau;
        all.push_back(j);
        char line[160];
        std::snprintf(line, sizeof line, "%-12s %6.0f %5d %6.1f %6.1f %5d %11.2f\n", case_name(r.covariance).c_str(),
                      r.tau, plan.nl, plan.nu_star, plan.nu, plan.two_step_n, 100.0 * plan.two_step_power);
        text << line;
    }
    out << (o.out == "json" ? dump(all) : text.str());
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Closed-form MMRM analysis, trial design and simulation"};
    app.require_subcommand(1);
    Options o;

    auto add_out = [&](CLI::App* c) { c->add_option("--out", o.out, "Output format")->check(CLI::IsMember({"json", "text"})); };
    auto add_info = [&](CLI::App* c) {
        c->add_option("--info-mode", o.info, "Information matrix for var(beta)")
            ->check(CLI::IsMember({"expected", "observed"}));
    };

    auto* analyze = app.add_subcommand("analyze", "Fit an MMRM to monotone CSV data");
    analyze->add_option("--data", o.data, "CSV file")->required();
    analyze->add_option("--monotone-strategy", o.strategy, "Handling of intermittent gaps")
        ->check(CLI::IsMember({"exclude", "truncate", "impute"}));
    add_info(analyze);
    add_out(analyze);

    auto* power = app.add_subcommand("power", "Design-stage power at a given size");
    power->add_option("--spec", o.spec, "Design JSON")->required();
    power->add_option("--n", o.n, "Total sample size")->required();
    power->add_option("--variance-n", o.variance_n, "Size at which the variance factor is evaluated");
    add_out(power);

    auto* size = app.add_subcommand("samplesize", "Two-step sample size");
    size->add_option("--spec", o.spec, "Design JSON")->required();
    size->add_option("--tail", o.tail, "Covariate tail term")->check(CLI::IsMember({"auto", "full", "simplified"}));
    size->add_flag("--no-bisection", o.no_bisection, "Never switch to bisection");
    size->add_flag("--inflate-nl", o.inflate_nl, "Evaluate step 2 at n_l + 2");
    add_out(size);

    auto* sim = app.add_subcommand("simulate", "Monte Carlo power of the KR Wald test");
    sim->add_option("--spec", o.spec, "Design JSON (alpha; size when --n is absent)")->required();
    sim->add_option("--gen", o.gen, "Generator JSON")->required();
    sim->add_option("--n", o.n, "Total sample size");
    sim->add_option("--reps", o.reps, "Replications")->check(CLI::PositiveNumber);
    sim->add_option("--seed", o.seed, "Master seed");
    sim->add_option("--workers", o.workers, "Worker threads")->check(CLI::PositiveNumber);
    sim->add_option("--records", o.records, "Write per-replication TSV here");
    add_info(sim);
    add_out(sim);

    auto* tables = app.add_subcommand("tables", "Built-in sample-size tables");
    tables->add_option("--table", o.table, "2: baseline covariate only; 3: plus a 3-level factor")
        ->check(CLI::IsMember({2, 3}));
    tables->add_option("--row", o.row, "Single row as <structure>,<tau>");
    add_out(tables);

    std::vector<std::string> storage{"mmrm"};
    storage.insert(storage.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& s : storage) argv.push_back(s.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitParse;
    }

    try {
        if (analyze->parsed()) return cmd_analyze(o, out);
        if (power->parsed()) return cmd_power(o, out);
        if (size->parsed()) return cmd_samplesize(o, out);
        if (sim->parsed()) return cmd_simulate(o, out);
        if (tables->parsed()) return cmd_tables(o, out);
    } catch (const NonMonotoneError& e) {
        err << "error: " << e.what() << "\n";
        return kExitNonMonotone;
    } catch (const ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitParse;
    } catch (const InvalidSpecError& e) {
        err << "error: " << e.what() << "\n";
        return kExitParse;
    } catch (const InvalidModelError& e) {
        err << "error: " << e.what() << "\n";
        return kExitParse;
    } catch (const DimensionMismatchError& e) {
        err << "error: " << e.what() << "\n";
        return kExitParse;
    } catch (const RankDeficientError& e) {
        err << "error: " << e.what() << "\n";
        return kExitFit;
    } catch (const InsufficientRowsError& e) {
        err << "error: " << e.what() << "\n";
        return kExitFit;
    } catch (const InsufficientDataError& e) {
        err << "error: " << e.what() << "\n";
        return kExitFit;
    } catch (const EmptyVisitError& e) {
        err << "error: " << e.what() << "\n";
        return kExitFit;
    } catch (const SingularCovariateScatterError& e) {
        err << "error: " << e.what() << "\n";
        return kExitFit;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitFailure;
}

}  // namespace mmrm
