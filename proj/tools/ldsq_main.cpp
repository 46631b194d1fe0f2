// Command-line front end: verification suites, parameter sweeps, cloning
// tests and SQ oracle simulations with deterministic seeds and CSV output.
//
// Exit codes: 0 pass, 1 verification failure, 2 usage error, 3 sweep
// infeasible at every grid point.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <fstream>
#include <iostream>

#include "ldsq/cloning.hpp"
#include "ldsq/csv.hpp"
#include "ldsq/specfile.hpp"
#include "ldsq/sq.hpp"
#include "ldsq/stats.hpp"
#include "ldsq/suites.hpp"
#include "ldsq/sweep.hpp"

namespace {

using nlohmann::json;

int cmd_verify(const std::string& suite, std::uint64_t seed, const std::string& out_path) {
    std::vector<ldsq::SuiteReport> reports;
    try {
        reports = ldsq::run_suite(suite, seed);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    bool all_pass = true;
    json doc;
    doc["seed"] = seed;
    doc["suite"] = suite;
    doc["results"] = json::array();
    for (const auto& rep : reports) {
        for (const auto& check : rep.checks) {
            all_pass &= check.pass;
            std::cout << (check.pass ? "PASS" : "FAIL") << "  " << rep.suite << "/" << check.name;
            if (!check.detail.empty()) std::cout << "  (" << check.detail << ")";
            std::cout << "\n";
            doc["results"].push_back(
                {{"suite", rep.suite}, {"check", check.name}, {"pass", check.pass}, {"detail", check.detail}});
        }
    }
    doc["pass"] = all_pass;
    if (!out_path.empty()) {
        std::ofstream out(out_path);
        out << doc.dump(2) << "\n";
    }
    std::cout << (all_pass ? "PASS" : "FAIL") << "  overall\n";
    return all_pass ? 0 : 1;
}

void write_manifest(const std::string& out_path, const std::string& spec_text, std::uint64_t seed,
                    double wall_ms, const json& tasks) {
    json doc;
    doc["tool"] = "ldsq";
    doc["version"] = "1.0.0";
    doc["seed"] = seed;
    doc["spec_hash"] = ldsq::fnv1a64(spec_text);
    doc["wall_clock_ms"] = wall_ms;
    doc["tasks"] = tasks;
    std::ofstream out(out_path + ".manifest.json");
    out << doc.dump(2) << "\n";
}

int cmd_sweep(const std::string& spec_path, const std::string& out_path, std::uint64_t seed,
              int jobs) {
    std::ifstream in(spec_path);
    if (!in) {
        std::cerr << "error: cannot open spec " << spec_path << "\n";
        return 2;
    }
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string spec_text = ss.str();

    const auto start = std::chrono::steady_clock::now();
    ldsq::SweepSpec sw;
    try {
        sw = ldsq::sweep_from_spec(ldsq::parse_spec_text(spec_text));
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    auto result = ldsq::run_sweep(sw, seed, jobs);
    result.csv.write(out_path);
    const double wall =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    json tasks;
    tasks["grid_points"] = result.total_points;
    tasks["feasible_points"] = result.feasible_points;
    write_manifest(out_path, spec_text, seed, wall, tasks);
    std::cout << "sweep: " << result.feasible_points << "/" << result.total_points
              << " grid points feasible, rows written to " << out_path << "\n";
    return result.feasible_points == 0 ? 3 : 0;
}

int cmd_clone_test(double gamma, int m, std::uint64_t trials, std::uint64_t seed,
                   const std::string& out_path, const std::string& graph_in,
                   const std::string& graph_out, bool unclone) {
    if (!graph_in.empty()) {
        auto g = ldsq::read_hyperedge_bitmap(graph_in);
        ldsq::CloneConfig cfg;
        cfg.m = m;
        cfg.gamma = gamma;
        cfg.seed = seed;
        if (unclone) {
            auto clones = ldsq::pc_clone(g, cfg);
            auto back = ldsq::pc_unclone(clones);
            ldsq::write_hyperedge_bitmap(graph_out, back);
        } else {
            auto clones = ldsq::pc_clone(g, cfg);
            for (std::size_t i = 0; i < clones.size(); ++i)
                ldsq::write_hyperedge_bitmap(graph_out + "." + std::to_string(i), clones[i]);
        }
        return 0;
    }
    auto rep = ldsq::run_cloning_suite(seed, trials);
    ldsq::CsvWriter csv({"check", "pass", "detail"});
    bool all = true;
    for (const auto& c : rep.checks) {
        csv.add_row({c.name, c.pass ? "1" : "0", c.detail});
        all &= c.pass;
        std::cout << (c.pass ? "PASS" : "FAIL") << "  " << c.name << "\n";
    }
    if (!out_path.empty()) csv.write(out_path);
    return all ? 0 : 1;
}

int cmd_sq_sim(const std::string& problem_path, double oracle_m, const std::string& adversary,
               std::uint64_t trials, std::uint64_t seed, const std::string& policy_name,
               const std::string& out_path, bool dump_transcripts) {
    ldsq::ZooInstance z;
    try {
        z = ldsq::instance_from_spec_file(problem_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    ldsq::Adversary adv;
    if (adversary == "honest")
        adv = ldsq::Adversary::Honest;
    else if (adversary == "toward_null")
        adv = ldsq::Adversary::TowardNull;
    else {
        std::cerr << "error: unknown adversary '" << adversary << "'\n";
        return 2;
    }
    ldsq::SqPolicy policy;
    if (policy_name == "parity-all") {
        std::vector<std::uint64_t> masks;
        for (const auto& alt : z.problem.prior.alternates)
            masks.push_back(std::get<ldsq::ParityAlternate>(alt).mask);
        policy = ldsq::sparse_parity_policy(masks, ldsq::vstat_tolerance(0.5, oracle_m));
    } else if (policy_name == "empty") {
        policy = ldsq::empty_policy();
    } else {
        std::cerr << "error: unknown policy '" << policy_name << "'\n";
        return 2;
    }
    auto rep = ldsq::run_sq_algorithm(policy, z.problem, oracle_m, adv, trials, seed, 4096,
                                      dump_transcripts);
    ldsq::CsvWriter csv(
        {"problem-id", "policy", "adversary", "oracle-m", "trials", "seed", "type1", "type2",
         "success"});
    csv.add_row({z.id, policy.name, adversary, ldsq::format_double(oracle_m),
                 std::to_string(trials), std::to_string(seed), ldsq::format_double(rep.type1_error),
                 ldsq::format_double(rep.type2_error), ldsq::format_double(rep.success)});
    if (!out_path.empty()) csv.write(out_path);
    std::cout << "success rate " << ldsq::format_double(rep.success) << " (type I "
              << ldsq::format_double(rep.type1_error) << ", type II "
              << ldsq::format_double(rep.type2_error) << ")\n";
    if (dump_transcripts && !out_path.empty()) {
        ldsq::CsvWriter tcsv({"transcript", "query", "true", "tolerance", "returned", "adversary"});
        for (std::size_t t = 0; t < rep.transcripts.size(); ++t)
            for (const auto& e : rep.transcripts[t].entries)
                tcsv.add_row({std::to_string(t), std::to_string(e.query_index),
                              ldsq::format_double(e.true_value), ldsq::format_double(e.tolerance),
                              ldsq::format_double(e.returned), e.adversary});
        tcsv.write(out_path + ".transcripts.csv");
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"low-degree likelihood ratios and statistical-query dimension"};
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    int jobs = 1;
    std::uint64_t cap_states = 1ULL << 22;
    int cap_restriction = 12;
    app.add_option("--seed", seed, "global seed")->capture_default_str();
    app.add_option("--jobs", jobs, "worker count for grid sweeps")->capture_default_str();
    app.add_option("--cap-states", cap_states, "dense state-space cap")->capture_default_str();
    app.add_option("--cap-restriction", cap_restriction,
                   "largest restriction mode set enumerated exactly")
        ->capture_default_str();

    auto* verify = app.add_subcommand("verify", "run a verification suite");
    verify->fallthrough();
    std::string suite, verify_out;
    verify->add_option("suite", suite, "identities|inequalities|noise|cloning|sq|zoo|all")
        ->required();
    verify->add_option("--out", verify_out, "JSON report path");

    auto* sweep = app.add_subcommand("sweep", "parameter sweep to CSV");
    sweep->fallthrough();
    std::string spec_path, sweep_out;
    sweep->add_option("--spec", spec_path, "sweep spec file")->required();
    sweep->add_option("--out", sweep_out, "output CSV path")->required();

    auto* clone = app.add_subcommand("clone-test", "cloning reductions: GOF statistics / graph io");
    clone->fallthrough();
    double gamma = 0.4;
    int clone_m = 3;
    std::uint64_t trials = 100000;
    std::string clone_out, graph_in, graph_out;
    bool unclone = false;
    clone->add_option("--gamma", gamma, "Bernoulli base density")->capture_default_str();
    clone->add_option("--m", clone_m, "clone count")->capture_default_str();
    clone->add_option("--trials", trials, "GOF trial count")->capture_default_str();
    clone->add_option("--out", clone_out, "CSV output path");
    clone->add_option("--graph-in", graph_in, "hyperedge bitmap input");
    clone->add_option("--graph-out", graph_out, "hyperedge bitmap output (prefix for clones)");
    clone->add_flag("--unclone", unclone, "clone then AND-reconstruct the input graph");

    auto* sqsim = app.add_subcommand("sq-sim", "VSTAT oracle simulation");
    sqsim->fallthrough();
    std::string problem_path, adversary = "honest", policy_name = "parity-all", sim_out;
    double oracle_m = 100.0;
    std::uint64_t sim_trials = 1000;
    bool dump_transcripts = false;
    sqsim->add_option("--problem", problem_path, "problem spec file")->required();
    sqsim->add_option("--oracle-m", oracle_m, "VSTAT strength")->capture_default_str();
    sqsim->add_option("--adversary", adversary, "honest|toward_null")->capture_default_str();
    sqsim->add_option("--trials", sim_trials, "trial count")->capture_default_str();
    sqsim->add_option("--policy", policy_name, "parity-all|empty")->capture_default_str();
    sqsim->add_option("--out", sim_out, "CSV output path");
    sqsim->add_flag("--dump-transcripts", dump_transcripts, "write transcripts CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    ldsq::dense_state_cap() = cap_states;
    ldsq::restriction_enumeration_cap() = cap_restriction;
    try {
        if (*verify) return cmd_verify(suite, seed, verify_out);
        if (*sweep) return cmd_sweep(spec_path, sweep_out, seed, jobs);
        if (*clone) return cmd_clone_test(gamma, clone_m, trials, seed, clone_out, graph_in,
                                          graph_out, unclone);
        if (*sqsim) return cmd_sq_sim(problem_path, oracle_m, adversary, sim_trials, seed,
                                      policy_name, sim_out, dump_transcripts);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
