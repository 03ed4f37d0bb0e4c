// creditrisk: synthetic data generation, training, scoring, evaluation and
// grid search for tree-ensemble default models.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "creditrisk/cli.hpp"

namespace {

using namespace creditrisk;
using namespace creditrisk::cli;

struct ForestFlags {
    std::size_t max_features = 0;
};

void add_forest_flags(CLI::App* cmd, ForestParams& p, ForestFlags& f) {
    cmd->add_option("--no-trees", p.no_trees, "Number of trees")->capture_default_str();
    cmd->add_option("--sample-split", p.sample_split, "Minimum rows to split a node")->capture_default_str();
    cmd->add_option("--sample-leaf", p.sample_leaf, "Minimum rows per leaf")->capture_default_str();
    cmd->add_option("--max-features", f.max_features, "Features tried per node (0 = sqrt)");
}

void add_boost_flags(CLI::App* cmd, BoostParams& p) {
    cmd->add_option("--n-rounds", p.n_rounds, "Boosting rounds")->capture_default_str();
    cmd->add_option("--max-depth", p.max_depth, "Maximum tree depth (0 = unlimited)")->capture_default_str();
    cmd->add_option("--eta", p.eta, "Learning rate")->capture_default_str();
    cmd->add_option("--colsample", p.colsample_bytree, "Column fraction per tree")->capture_default_str();
    cmd->add_option("--subsample", p.subsample, "Row fraction per tree")->capture_default_str();
    cmd->add_option("--min-child-weight", p.min_child_weight, "Minimum hessian mass per child")
        ->capture_default_str();
    cmd->add_option("--gamma", p.gamma, "Minimum split gain")->capture_default_str();
    cmd->add_option("--alpha", p.alpha, "L1 penalty on leaf weights")->capture_default_str();
    cmd->add_option("--lambda", p.lambda, "L2 penalty on leaf weights")->capture_default_str();
    cmd->add_option("--base-score", p.base_score, "Initial probability")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tree-ensemble credit default models"};
    app.require_subcommand(1);

    GenDataOptions gen;
    auto* gen_cmd = app.add_subcommand("gen-data", "Generate synthetic multi-source records");
    gen_cmd->add_option("--n", gen.n, "Number of records");
    gen_cmd->add_option("--seed", gen.seed, "Generator seed");
    gen_cmd->add_option("--missing-rate", gen.missing_rate, "Probability that a feature cell is missing");
    gen_cmd->add_option("--config", gen.config, "Generator config file");
    gen_cmd->add_option("--out", gen.out_dir, "Output directory")->capture_default_str();

    TrainOptions train;
    ForestFlags train_ff;
    std::string train_model = "boosted";
    auto* train_cmd = app.add_subcommand("train", "Fit a model and write a model file");
    train_cmd->add_option("--model", train_model, "forest or boosted")
        ->check(CLI::IsMember({"forest", "boosted"}))
        ->capture_default_str();
    train_cmd->add_option("--schema", train.schema, "Schema file")->required();
    train_cmd->add_option("--data-dir", train.data_dir, "Directory holding the source CSVs")->required();
    train_cmd->add_option("--label", train.label, "Label column (overrides the schema)");
    train_cmd->add_option("--train-fraction", train.train_fraction, "Training share of the split")
        ->capture_default_str();
    train_cmd->add_option("--seed", train.seed, "Seed for the split and the fit")->capture_default_str();
    train_cmd->add_option("--threads", train.threads, "Worker threads")->capture_default_str();
    train_cmd->add_option("--out", train.out, "Model file to write")->required();
    train_cmd->add_option("--scores-out", train.scores_out, "Write test-set scores to this CSV");
    add_forest_flags(train_cmd, train.forest, train_ff);
    add_boost_flags(train_cmd, train.boost);

    PredictOptions predict;
    auto* predict_cmd = app.add_subcommand("predict", "Score records with a saved model");
    predict_cmd->add_option("--model", predict.model, "Model file")->required();
    predict_cmd->add_option("--data", predict.data, "CSV holding every model field");
    predict_cmd->add_option("--schema", predict.schema, "Schema file");
    predict_cmd->add_option("--data-dir", predict.data_dir, "Directory holding the source CSVs");
    predict_cmd->add_option("--threads", predict.threads, "Worker threads")->capture_default_str();
    predict_cmd->add_option("--out", predict.out, "Score CSV to write")->required();

    EvaluateOptions evaluate_opts;
    auto* eval_cmd = app.add_subcommand("evaluate", "Write PR, ROC and Lorenz tables for a score file");
    eval_cmd->add_option("--scores", evaluate_opts.scores, "Score CSV")->required();
    eval_cmd->add_option("--labels", evaluate_opts.labels, "Labeled CSV joined on the id column");
    eval_cmd->add_option("--label", evaluate_opts.label, "Label column")->capture_default_str();
    eval_cmd->add_option("--id-column", evaluate_opts.id_column, "Id column")->capture_default_str();
    eval_cmd->add_option("--out-dir", evaluate_opts.out_dir, "Report directory")->capture_default_str();

    TuneOptions tune;
    auto* tune_cmd = app.add_subcommand("tune", "Grid search from a grid file");
    tune_cmd->add_option("--grid", tune.grid, "Grid file (JSON)")->required();
    tune_cmd->add_option("--schema", tune.schema, "Schema file")->required();
    tune_cmd->add_option("--data-dir", tune.data_dir, "Directory holding the source CSVs")->required();
    tune_cmd->add_option("--label", tune.label, "Label column (overrides the schema)");
    tune_cmd->add_option("--train-fraction", tune.train_fraction, "Training share of the split")
        ->capture_default_str();
    tune_cmd->add_option("--seed", tune.seed, "Seed for the split and every fit (overrides the grid)");
    tune_cmd->add_option("--threads", tune.threads, "Concurrent trials")->capture_default_str();
    tune_cmd->add_option("--out", tune.out, "Results table CSV")->required();
    tune_cmd->add_option("--curves-dir", tune.curves_dir, "Write one PR table per trial here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << error_line("usage", e.what()) << "\n";
        return static_cast<int>(ExitCode::usage);
    }

    return run_guarded(std::cerr, [&]() -> int {
        if (*gen_cmd) return cmd_gen_data(gen, std::cout);
        if (*train_cmd) {
            train.kind = *parse_model_kind(train_model);
            if (train_ff.max_features > 0) train.forest.max_features = train_ff.max_features;
            return cmd_train(train, std::cout);
        }
        if (*predict_cmd) return cmd_predict(predict, std::cout);
        if (*eval_cmd) return cmd_evaluate(evaluate_opts, std::cout);
        return cmd_tune(tune, std::cout);
    });
}
