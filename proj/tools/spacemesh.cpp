#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <string>

#include "spacemesh/cli.hpp"

namespace {

using namespace spacemesh;

void add_fit_options(CLI::App* cmd, FitConfig& cfg) {
    static const std::map<std::string, DistanceMode> distance_map = {
        {"spacetime", DistanceMode::spacetime},
        {"euclidean", DistanceMode::squared_euclidean},
        {"dot", DistanceMode::negative_dot}};
    static const std::map<std::string, ReductionMode> reduction_map = {
        {"prod", ReductionMode::prod_sum},
        {"max", ReductionMode::elementwise_max_sum},
        {"add", ReductionMode::add_sum}};
    cmd->add_option("--ks", cfg.k_s, "space coordinate dimension")->capture_default_str();
    cmd->add_option("--kt", cfg.k_t, "time coordinate dimension")->capture_default_str();
    cmd->add_option("--kp", cfg.k_p, "permutation feature dimension")->capture_default_str();
    cmd->add_option("--distance", cfg.distance, "adjacency distance function")
        ->transform(CLI::CheckedTransformer(distance_map, CLI::ignore_case))
        ->default_str("spacetime");
    cmd->add_option("--reduction", cfg.reduction, "permutation feature reduction")
        ->transform(CLI::CheckedTransformer(reduction_map, CLI::ignore_case))
        ->default_str("prod");
    cmd->add_option("--lr", cfg.learning_rate, "Adam learning rate")->capture_default_str();
    cmd->add_option("--max-iters", cfg.max_iters, "iteration budget")->capture_default_str();
    cmd->add_option("--lambda", cfg.lambda, "negative-pair weight; <=0 selects 4*E/V^2")
        ->capture_default_str();
    cmd->add_option("--perm-weight", cfg.perm_weight, "permutation loss weight")->capture_default_str();
    cmd->add_option("--sinkhorn-iters", cfg.sinkhorn.max_iters, "Sinkhorn sweep budget")
        ->capture_default_str();
    cmd->add_option("--sinkhorn-tol", cfg.sinkhorn.tol, "Sinkhorn column-sum tolerance")
        ->capture_default_str();
    cmd->add_option("--init-std", cfg.init_std, "embedding init standard deviation")
        ->capture_default_str();
    cmd->add_option("--tau-init", cfg.tau_init, "initial edge threshold")->capture_default_str();
    cmd->add_option("--seed", cfg.seed, "random seed")->capture_default_str();
    cmd->add_option("--negative-samples", cfg.negative_samples,
                    "sampled non-edges per iteration (0 = exact sum)")
        ->capture_default_str();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"SpaceMesh continuous mesh representation toolkit"};
    app.require_subcommand(1);

    cli::FitArgs fit_args;
    auto* fit_cmd = app.add_subcommand("fit", "encode a mesh into per-vertex embeddings");
    fit_cmd->add_option("--input", fit_args.input, "input OBJ mesh")->required();
    fit_cmd->add_option("--output", fit_args.output, "output embedding file (.semb)")->required();
    add_fit_options(fit_cmd, fit_args.config);

    cli::ExtractArgs extract_args;
    FitConfig extract_cfg; // reuse mode/sinkhorn flags
    auto* extract_cmd = app.add_subcommand("extract", "decode embeddings into a halfedge mesh");
    extract_cmd->add_option("--emb", extract_args.emb_path, "input embedding file")->required();
    extract_cmd->add_option("--output", extract_args.output, "output OBJ mesh")->required();
    add_fit_options(extract_cmd, extract_cfg);

    cli::RoundtripArgs roundtrip_args;
    auto* roundtrip_cmd = app.add_subcommand("roundtrip", "fit, decode, and compare connectivity");
    roundtrip_cmd->add_option("--input", roundtrip_args.input, "input OBJ mesh")->required();
    add_fit_options(roundtrip_cmd, roundtrip_args.config);

    std::string validate_input;
    auto* validate_cmd = app.add_subcommand("validate", "check halfedge manifoldness invariants");
    validate_cmd->add_option("--input", validate_input, "input OBJ mesh")->required();

    cli::MetricsArgs metrics_args;
    auto* metrics_cmd = app.add_subcommand("metrics", "geometric accuracy metrics pred vs gt");
    metrics_cmd->add_option("--pred", metrics_args.pred, "predicted OBJ mesh")->required();
    metrics_cmd->add_option("--gt", metrics_args.gt, "ground truth OBJ mesh")->required();
    metrics_cmd->add_option("--samples", metrics_args.samples, "surface samples per mesh")
        ->capture_default_str();
    metrics_cmd->add_option("--seed", metrics_args.seed, "sampling seed")->capture_default_str();
    metrics_cmd->add_option("--f1-threshold", metrics_args.f1_threshold, "F1 distance threshold")
        ->capture_default_str();
    metrics_cmd->add_option("--edge-dot-threshold", metrics_args.edge_dot_threshold,
                            "edge point mean-normal-dot threshold")
        ->capture_default_str();
    metrics_cmd->add_option("--edge-knn", metrics_args.edge_knn, "edge point neighbor count")
        ->capture_default_str();
    metrics_cmd->add_option("--normal-degrees", metrics_args.normal_degrees,
                            "inaccurate normal angle threshold")
        ->capture_default_str();
    metrics_cmd->add_option("--csv-out", metrics_args.csv_out, "also write a CSV row here");

    cli::StatsArgs stats_args;
    auto* stats_cmd = app.add_subcommand("stats", "edge length / corner angle statistics");
    stats_cmd->add_option("--input", stats_args.input, "input OBJ mesh")->required();
    stats_cmd->add_option("--hist-out", stats_args.hist_out, "histogram CSV output");
    stats_cmd->add_option("--bins", stats_args.bins, "histogram bins")->capture_default_str();

    cli::AblateArgs ablate_args;
    auto* ablate_cmd = app.add_subcommand("ablate", "distance / reduction convergence ablations");
    ablate_cmd->add_option("--input", ablate_args.input, "input OBJ mesh")->required();
    ablate_cmd->add_option("--out", ablate_args.out_csv, "curves CSV output")->required();
    ablate_cmd->add_option("--budget", ablate_args.budget, "iteration budget per mode")
        ->capture_default_str();
    add_fit_options(ablate_cmd, ablate_args.config);

    CLI11_PARSE(app, argc, argv);

    if (fit_cmd->parsed()) return cli::run_fit(fit_args);
    if (extract_cmd->parsed()) {
        extract_args.distance = extract_cfg.distance;
        extract_args.reduction = extract_cfg.reduction;
        extract_args.sinkhorn = extract_cfg.sinkhorn;
        return cli::run_extract(extract_args);
    }
    if (roundtrip_cmd->parsed()) return cli::run_roundtrip(roundtrip_args);
    if (validate_cmd->parsed()) return cli::run_validate(validate_input);
    if (metrics_cmd->parsed()) return cli::run_metrics(metrics_args);
    if (stats_cmd->parsed()) return cli::run_stats(stats_args);
    if (ablate_cmd->parsed()) return cli::run_ablate(ablate_args);
    return cli::kExitInternalError;
}
