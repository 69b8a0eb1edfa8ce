// grid-attack: DC state-estimation sandbox with a topology-error attack
// synthesizer. Subcommands cover plain estimation, measurement simulation,
// attack construction and verification, Monte Carlo residue studies, state
// forecasting, and bad-data detection.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gridattack/attack_synthesis.hpp"
#include "gridattack/bvls.hpp"
#include "gridattack/experiment.hpp"
#include "gridattack/forecasting.hpp"
#include "gridattack/network_model.hpp"
#include "gridattack/topology_error.hpp"
#include "gridattack/types.hpp"
#include "gridattack/wls_estimator.hpp"

namespace {

using nlohmann::ordered_json;
using namespace gridattack;

struct CommonOptions {
    std::string case_path;
    std::string measurements_path;
    std::string weights_path;
    std::string scenario_path;
    std::string history_path;
    std::string out_dir;
    std::string format = "json";
    std::string error_branch;  // "FROM-TO"
    std::string error_kind = "inclusion";
    std::uint64_t seed = 42;
    int trials = 10000;
    int order = 2;
};

Vec sigma_for(const CommonOptions& opt, const GridCase& grid) {
    if (!opt.weights_path.empty()) return load_weights(opt.weights_path, grid).sigma;
    return Vec::Constant(grid.n_measurements(), kDefaultSigma);
}

/// Measurements from file when given, otherwise simulated at the case
/// operating point with seeded meter noise.
Vec measurements_for(const CommonOptions& opt, const GridCase& grid, const Vec& sigma) {
    if (!opt.measurements_path.empty())
        return load_measurements(opt.measurements_path, grid).values;
    const Vec x = operating_state(grid);
    return simulate_measurements(grid, x, sigma, opt.seed).values;
}

std::optional<TopologyError> parse_error_option(const CommonOptions& opt,
                                                const GridCase& grid) {
    if (opt.error_branch.empty()) return std::nullopt;
    const auto dash = opt.error_branch.find('-');
    if (dash == std::string::npos)
        throw validation_error("--error-branch expects FROM-TO, e.g. 3-4");
    int from = 0, to = 0;
    try {
        from = std::stoi(opt.error_branch.substr(0, dash));
        to = std::stoi(opt.error_branch.substr(dash + 1));
    } catch (const std::exception&) {
        throw validation_error("--error-branch expects numeric bus ids, e.g. 3-4");
    }
    if (opt.error_kind != "inclusion" && opt.error_kind != "exclusion")
        throw validation_error("--error-kind must be inclusion or exclusion");
    return make_error(grid, from, to,
                      opt.error_kind == "inclusion" ? ErrorKind::inclusion
                                                    : ErrorKind::exclusion);
}

void emit(const CommonOptions& opt, const ordered_json& report) {
    if (opt.format == "csv") {
        std::cout << "key,value\n";
        for (const auto& [key, val] : report.items())
            if (!val.is_structured()) std::cout << key << "," << val.dump() << "\n";
    } else {
        std::cout << report.dump(2) << "\n";
    }
    if (!opt.out_dir.empty()) {
        std::filesystem::create_directories(opt.out_dir);
        write_json(opt.out_dir + "/report.json", report);
    }
}

std::string config_fingerprint(const std::string& command, const CommonOptions& opt,
                               const GridCase& grid) {
    std::ostringstream s;
    s << command << "|case=" << grid.name << "|seed=" << opt.seed
      << "|trials=" << opt.trials << "|order=" << opt.order
      << "|scenario=" << opt.scenario_path << "|weights=" << opt.weights_path
      << "|measurements=" << opt.measurements_path << "|error=" << opt.error_branch << ":"
      << opt.error_kind;
    return s.str();
}

ordered_json report_header(const std::string& command, const CommonOptions& opt,
                           const GridCase& grid) {
    ordered_json r;
    r["command"] = command;
    r["case"] = grid.name;
    r["seed"] = opt.seed;
    r["config_hash"] = hex64(fnv1a64(config_fingerprint(command, opt, grid)));
    return r;
}

int run_estimate(const CommonOptions& opt) {
    const GridCase grid = load_case(opt.case_path);
    const Vec sigma = sigma_for(opt, grid);
    const Vec z = measurements_for(opt, grid, sigma);
    const Mat H = build_jacobian(grid);
    const EstimationResult res = estimate(H, sigma, z);
    if (res.ill_conditioned)
        std::cerr << "warning: gain matrix condition " << res.condition
                  << " exceeds 1e12; estimate may be unreliable\n";
    const ChiSquareTest chi = chi_square_test(res, sigma);
    const NormalizedResidues rn = normalized_residues(res);
    const MeasurementLayout layout(grid);

    ordered_json r = report_header("estimate", opt, grid);
    r["objective"] = res.objective;
    r["condition"] = res.condition;
    ordered_json states = ordered_json::array();
    for (int c = 0; c < grid.n_states(); ++c) {
        ordered_json row;
        row["bus"] = grid.state_bus(c);
        row["angle_deg"] = res.state[c] * kRadToDeg;
        states.push_back(row);
    }
    r["state_deg"] = states;
    r["chi_square"] = {{"statistic", chi.statistic},
                       {"threshold", chi.threshold},
                       {"dof", chi.dof},
                       {"passed", chi.passed}};
    int suspect = -1;
    double top = -1.0;
    for (int i = 0; i < rn.values.size(); ++i)
        if (rn.computable[i] && rn.values[i] > top) {
            top = rn.values[i];
            suspect = i;
        }
    if (suspect >= 0)
        r["largest_normalized_residue"] = {{"index", suspect + 1},
                                           {"label", layout.label(suspect, grid)},
                                           {"value", top}};
    emit(opt, r);
    return 0;
}

int run_simulate(const CommonOptions& opt) {
    const GridCase grid = load_case(opt.case_path);
    const Vec sigma = sigma_for(opt, grid);
    const Vec x = operating_state(grid);
    Vec z;
    if (auto err = parse_error_option(opt, grid)) {
        // measure the system as it really is under the stated topology error:
        // the branch state differs from what the case model assumes
        const TopologyErrorModel model = build_error_model(grid, *err, sigma);
        std::mt19937_64 rng(detail::splitmix64(opt.seed));
        std::normal_distribution<double> gauss(0.0, 1.0);
        z = model.H_model * x;
        for (int i = 0; i < z.size(); ++i) z[i] += sigma[i] * gauss(rng);
    } else {
        z = simulate_measurements(grid, x, sigma, opt.seed).values;
    }
    ordered_json doc;
    doc["layout"] = "canonical";
    doc["values"] = json_vector(z);
    if (!opt.out_dir.empty()) {
        std::filesystem::create_directories(opt.out_dir);
        write_json(opt.out_dir + "/measurements.json", doc);
    }
    std::cout << doc.dump(2) << "\n";
    return 0;
}

int run_attack(const CommonOptions& opt) {
    const GridCase grid = load_case(opt.case_path);
    if (opt.scenario_path.empty())
        throw validation_error("attack requires --scenario");
    const AttackSpec spec = load_attack_spec(opt.scenario_path, grid);
    const Vec sigma = sigma_for(opt, grid);
    const Vec z_true = measurements_for(opt, grid, sigma);

    const TopologyErrorModel model = build_error_model(grid, spec.error, sigma);
    const AttackProblem prob = build_attack_problem(model, spec, sigma, z_true);
    const AttackResult attack = solve_attack(prob);
    const AttackVerification ver = verify_attack(grid, model, prob, attack, sigma);

    // Worthiness: compare the engineered misestimate against where the state
    // was headed anyway, per a short autoregressive forecast.
    const StateHistory hist = generate_history(grid, 64, 0.01, opt.seed);
    const ARModel ar = fit_yule_walker(hist, opt.order);
    const WorthCheck worth = attack_worth_check(prob.target, forecast(ar, hist), spec.delta);
    if (!worth.worth)
        std::cerr << "warning: misestimate differs from the forecast state by only "
                  << worth.gap << " rad (delta " << spec.delta
                  << "); attack may not be worthwhile\n";

    const auto& br = grid.branches[spec.error.branch];
    ordered_json r = report_header("attack", opt, grid);
    r["error"] = {{"branch", {br.from, br.to}}, {"kind", kind_name(spec.error.kind)}};
    r["epsilon"] = spec.epsilon;
    r["delta"] = spec.delta;
    ordered_json locked = ordered_json::array();
    for (int i : spec.locked) locked.push_back(i + 1);
    r["locked_meters"] = locked;
    r["solver"] = {{"converged", attack.converged},
                   {"iterations", attack.iterations},
                   {"objective", attack.objective},
                   {"projected_gradient_norm", attack.pg_norm}};
    ordered_json top = ordered_json::array();
    for (int j = 0; j < 8 && j < static_cast<int>(ver.ranking.size()); ++j)
        top.push_back(ver.ranking[j] + 1);
    ordered_json incident = ordered_json::array();
    for (int i : ver.incident) incident.push_back(i + 1);
    r["verification"] = {{"max_state_gap_deg", ver.max_state_gap_deg},
                         {"signature_gap_inf", ver.signature_gap},
                         {"within_epsilon", ver.signature_gap <= spec.epsilon},
                         {"locked_attack_max_abs", ver.locked_max_abs},
                         {"ranking_top8", top},
                         {"incident_meters", incident},
                         {"top4_incident", ver.top4_incident}};
    r["worthiness"] = {{"forecast_gap", worth.gap}, {"delta", spec.delta}, {"worth", worth.worth}};

    const std::string dir = opt.out_dir.empty() ? "." : opt.out_dir;
    std::filesystem::create_directories(dir);
    const MeasurementLayout layout(grid);

    std::vector<std::vector<std::string>> rows;
    for (int i = 0; i < grid.n_measurements(); ++i)
        rows.push_back({std::to_string(i + 1), layout.label(i, grid), fmt_double(z_true[i]),
                        fmt_double(attack.z_attacked[i]), fmt_double(attack.attack_vector[i])});
    write_csv(dir + "/measurements.csv",
              {"index", "label", "true_value", "attacked_value", "attack"}, rows);

    rows.clear();
    for (int i = 0; i < grid.n_measurements(); ++i)
        rows.push_back({std::to_string(i + 1), layout.label(i, grid),
                        fmt_double(attack.attack_vector[i])});
    write_csv(dir + "/attack_vector.csv", {"index", "label", "attack"}, rows);

    rows.clear();
    for (int i = 0; i < grid.n_measurements(); ++i)
        rows.push_back({std::to_string(i + 1), layout.label(i, grid),
                        fmt_double(ver.post_residue[i]), fmt_double(ver.normalized.values[i]),
                        ver.normalized.computable[i] ? "1" : "0",
                        fmt_double(prob.signature[i])});
    write_csv(dir + "/residues.csv",
              {"index", "label", "residue", "normalized", "computable", "expected"}, rows);

    rows.clear();
    for (int c = 0; c < grid.n_states(); ++c)
        rows.push_back({std::to_string(grid.state_bus(c)),
                        fmt_double(prob.target[c] * kRadToDeg),
                        fmt_double(ver.post_state[c] * kRadToDeg),
                        fmt_double(ver.state_gap_deg[c])});
    write_csv(dir + "/states.csv", {"bus", "target_deg", "post_deg", "gap_deg"}, rows);

    write_json(dir + "/report.json", r);
    if (opt.format == "csv") {
        std::cout << "key,value\n";
        for (const auto& [key, val] : r.items())
            if (!val.is_structured()) std::cout << key << "," << val.dump() << "\n";
    } else {
        std::cout << r.dump(2) << "\n";
    }
    return 0;
}

int run_montecarlo(const CommonOptions& opt) {
    const GridCase grid = load_case(opt.case_path);
    const Vec sigma = sigma_for(opt, grid);
    if (opt.trials < 100)
        std::cerr << "warning: " << opt.trials
                  << " trials is a low sample; bounds assume a large trial count\n";
    const Vec x = operating_state(grid);

    Mat H_truth, hat, omega;
    ordered_json error_desc;
    if (auto err = parse_error_option(opt, grid)) {
        const TopologyErrorModel model = build_error_model(grid, *err, sigma);
        if (!model.estimator_observable)
            throw numerical_error("erroneous model loses observability; no residue statistics");
        H_truth = model.H_true;
        hat = model.hat_model;
        omega = model.residue_covariance;
        const auto& br = grid.branches[err->branch];
        error_desc = {{"branch", {br.from, br.to}}, {"kind", kind_name(err->kind)}};
    } else {
        H_truth = build_jacobian(grid);
        const EstimationResult probe = estimate(H_truth, sigma, Vec::Zero(H_truth.rows()));
        hat = probe.hat_matrix;
        omega = probe.residue_covariance;
    }

    const MonteCarloSummary mc =
        residue_monte_carlo(H_truth, hat, omega, sigma, x, opt.trials, opt.seed);
    const MeasurementLayout layout(grid);
    ordered_json r = report_header("montecarlo", opt, grid);
    if (!error_desc.is_null()) r["error"] = error_desc;
    r["trials"] = mc.trials;
    r["within_bounds"] = mc.within_bounds;
    r["worst_meter"] = {{"index", mc.worst_meter + 1},
                        {"label", layout.label(mc.worst_meter, grid)}};
    ordered_json meters = ordered_json::array();
    for (int i = 0; i < mc.mean_residue.size(); ++i) {
        ordered_json row;
        row["index"] = i + 1;
        row["label"] = layout.label(i, grid);
        row["mean_residue"] = mc.mean_residue[i];
        row["expected"] = mc.expected[i];
        row["bound"] = mc.bound[i];
        meters.push_back(row);
    }
    r["meters"] = meters;
    emit(opt, r);
    return 0;
}

int run_forecast(const CommonOptions& opt) {
    const GridCase grid = load_case(opt.case_path);
    StateHistory hist;
    if (!opt.history_path.empty()) {
        hist = load_history(opt.history_path);
        if (hist.n_variables() != grid.n_states())
            throw dimension_error("history variables do not match the case state size");
    } else {
        hist = generate_history(grid, std::max(opt.trials, opt.order + 2), 0.01, opt.seed);
    }
    const ARModel ar = fit_yule_walker(hist, opt.order);
    const Vec next = forecast(ar, hist);

    ordered_json r = report_header("forecast", opt, grid);
    r["order"] = ar.order;
    r["history_length"] = hist.length();
    ordered_json vars = ordered_json::array();
    for (int v = 0; v < ar.n_variables(); ++v) {
        ordered_json row;
        row["bus"] = grid.state_bus(v);
        ordered_json coeffs = ordered_json::array();
        for (int j = 0; j < ar.order; ++j) coeffs.push_back(ar.coefficients[v][j]);
        row["coefficients"] = coeffs;
        row["noise_variance"] = ar.noise_variance[v];
        row["forecast_deg"] = next[v] * kRadToDeg;
        vars.push_back(row);
    }
    r["variables"] = vars;
    emit(opt, r);
    return 0;
}

int run_detect(const CommonOptions& opt) {
    const GridCase grid = load_case(opt.case_path);
    const Vec sigma = sigma_for(opt, grid);
    const Vec z = measurements_for(opt, grid, sigma);
    const Mat H = build_jacobian(grid);
    const EstimationResult res = estimate(H, sigma, z);
    const ChiSquareTest chi = chi_square_test(res, sigma);
    const NormalizedResidues rn = normalized_residues(res);
    const MeasurementLayout layout(grid);

    std::vector<int> order(rn.values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return rn.values[a] > rn.values[b]; });

    ordered_json r = report_header("detect", opt, grid);
    r["chi_square"] = {{"statistic", chi.statistic},
                       {"threshold", chi.threshold},
                       {"dof", chi.dof},
                       {"passed", chi.passed}};
    ordered_json suspects = ordered_json::array();
    for (int j = 0; j < 8 && j < static_cast<int>(order.size()); ++j) {
        const int i = order[j];
        ordered_json row;
        row["index"] = i + 1;
        row["label"] = layout.label(i, grid);
        row["normalized_residue"] = rn.values[i];
        row["computable"] = static_cast<bool>(rn.computable[i]);
        suspects.push_back(row);
    }
    r["suspects"] = suspects;

    if (auto err = parse_error_option(opt, grid)) {
        const TopologyErrorModel model = build_error_model(grid, *err, sigma);
        if (model.estimator_observable) {
            const Vec expected = expected_residue(model, res.state);
            r["topology_error"] = {
                {"detectable", is_detectable(model, res.state)},
                {"expected_residue_inf", expected.lpNorm<Eigen::Infinity>()}};
        } else {
            r["topology_error"] = {{"detectable", nullptr},
                                   {"note", "erroneous model loses observability"}};
        }
    }
    emit(opt, r);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DC state-estimation attack synthesizer"};
    app.require_subcommand(1);

    CommonOptions opt;
    auto add_common = [&](CLI::App* sub, bool needs_case = true) {
        auto* c = sub->add_option("--case", opt.case_path, "grid case file (JSON)");
        if (needs_case) c->required();
        sub->add_option("--weights", opt.weights_path, "per-meter sigma file (JSON)");
        sub->add_option("--seed", opt.seed, "random seed")
            ->envname("GRID_ATTACK_SEED")
            ->default_val(42);
        sub->add_option("--out", opt.out_dir, "directory for report files");
        sub->add_option("--format", opt.format, "stdout format")
            ->check(CLI::IsMember({"json", "csv"}))
            ->default_val("json");
    };

    auto* est = app.add_subcommand("estimate", "estimate the state from measurements");
    add_common(est);
    est->add_option("--measurements", opt.measurements_path, "measurement file (JSON)");

    auto* sim = app.add_subcommand("simulate", "simulate a measurement snapshot");
    add_common(sim);
    sim->add_option("--error-branch", opt.error_branch, "apply topology error FROM-TO");
    sim->add_option("--error-kind", opt.error_kind, "inclusion|exclusion");

    auto* att = app.add_subcommand("attack", "synthesize a topology-error attack");
    add_common(att);
    att->add_option("--scenario", opt.scenario_path, "attack scenario file (JSON)")->required();
    att->add_option("--measurements", opt.measurements_path, "measurement file (JSON)");
    att->add_option("--order", opt.order, "autoregressive order for the worthiness forecast")
        ->default_val(2);

    auto* mc = app.add_subcommand("montecarlo", "Monte Carlo residue statistics");
    add_common(mc);
    mc->add_option("--trials", opt.trials, "number of noise draws")->default_val(10000);
    mc->add_option("--error-branch", opt.error_branch, "apply topology error FROM-TO");
    mc->add_option("--error-kind", opt.error_kind, "inclusion|exclusion");

    auto* fc = app.add_subcommand("forecast", "fit an autoregressive state forecast");
    add_common(fc);
    fc->add_option("--history", opt.history_path, "state history file (JSON)");
    fc->add_option("--order", opt.order, "autoregressive order")->default_val(2);
    fc->add_option("--trials", opt.trials, "generated history length")->default_val(64);

    auto* det = app.add_subcommand("detect", "bad-data and topology-error checks");
    add_common(det);
    det->add_option("--measurements", opt.measurements_path, "measurement file (JSON)");
    det->add_option("--error-branch", opt.error_branch, "hypothesized error FROM-TO");
    det->add_option("--error-kind", opt.error_kind, "inclusion|exclusion");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);  // prints message/usage
        return 2;
    }

    try {
        if (est->parsed()) return run_estimate(opt);
        if (sim->parsed()) return run_simulate(opt);
        if (att->parsed()) return run_attack(opt);
        if (mc->parsed()) return run_montecarlo(opt);
        if (fc->parsed()) return run_forecast(opt);
        if (det->parsed()) return run_detect(opt);
    } catch (const parse_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const validation_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const infeasible_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const convergence_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const numerical_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const fitting_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
