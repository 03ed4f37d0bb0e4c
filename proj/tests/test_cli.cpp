#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <sstream>

#include "creditrisk/cli.hpp"

using namespace creditrisk;
using namespace creditrisk::cli;
namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code;
    std::string output;
};

/// Runs the CLI binary with stderr folded into the captured output.
RunResult run(const std::string& args) {
    const std::string cmd = std::string(CREDITRISK_CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    std::string out;
    char buf[4096];
    while (const auto n = fread(buf, 1, sizeof buf, pipe)) out.append(buf, n);
    const int status = pclose(pipe);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

class CliTest : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = fs::temp_directory_path() / "creditrisk_cli_test";
        fs::remove_all(dir_);
        GenDataOptions gen;
        gen.n = 900;
        gen.seed = 5;
        gen.out_dir = dir_ / "data";
        std::ostringstream sink;
        ASSERT_EQ(cmd_gen_data(gen, sink), 0);
    }
    static void TearDownTestSuite() { fs::remove_all(dir_); }

    static fs::path data() { return dir_ / "data"; }
    static fs::path path(const std::string& name) { return dir_ / name; }

    static TrainOptions boosted_train(const std::string& model_name) {
        TrainOptions o;
        o.kind = ModelKind::boosted;
        o.schema = data() / "schema.txt";
        o.data_dir = data();
        o.seed = 4;
        o.boost.n_rounds = 8;
        o.boost.max_depth = 3;
        o.out = path(model_name);
        o.scores_out = path(model_name + ".scores.csv");
        return o;
    }

    static inline fs::path dir_;
};

}  // namespace

TEST_F(CliTest, GenDataWritesSourcesSchemaAndCoefficients) {
    for (const char* f : {"app.csv", "call_records.csv", "bureau.csv", "schema.txt", "generator.txt"}) {
        EXPECT_TRUE(fs::exists(data() / f)) << f;
    }
    const auto schema = load_schema(data() / "schema.txt");
    EXPECT_EQ(schema.sources.size(), 3u);
    const auto config = parse_generator_config(read_file(data() / "generator.txt"));
    EXPECT_EQ(config.terms.size(), 5u);
}

TEST_F(CliTest, GenDataReportsIncompleteRecords) {
    GenDataOptions gen;
    gen.n = 200;
    gen.missing_rate = 0.1;
    gen.out_dir = path("missing");
    std::ostringstream out;
    ASSERT_EQ(cmd_gen_data(gen, out), 0);
    EXPECT_NE(out.str().find("incomplete_records = "), std::string::npos);
    EXPECT_EQ(out.str().find("incomplete_records = 0\n"), std::string::npos);
}

TEST_F(CliTest, TrainSummaryHasTopTenImportance) {
    auto o = boosted_train("b.crm");
    std::ostringstream out;
    ASSERT_EQ(cmd_train(o, out), 0);
    const auto s = out.str();
    for (const char* key : {"train_auc = ", "train_ks = ", "test_auc = ", "test_ks = ", "model_bytes = "}) {
        EXPECT_NE(s.find(key), std::string::npos) << key;
    }
    const auto table = s.substr(s.find("rank,feature,importance"));
    EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 11);
}

TEST_F(CliTest, PredictReproducesTrainingScores) {
    auto o = boosted_train("p.crm");
    std::ostringstream sink;
    ASSERT_EQ(cmd_train(o, sink), 0);
    PredictOptions p;
    p.model = o.out;
    p.schema = o.schema;
    p.data_dir = o.data_dir;
    p.out = path("p_scores.csv");
    ASSERT_EQ(cmd_predict(p, sink), 0);

    std::map<std::string, std::string> predicted;
    const auto rows = parse_csv(read_file(p.out));
    for (std::size_t r = 1; r < rows.size(); ++r) predicted[rows[r].fields[0]] = rows[r].fields[1];
    const auto train_rows = parse_csv(read_file(*o.scores_out));
    ASSERT_GT(train_rows.size(), 1u);
    for (std::size_t r = 1; r < train_rows.size(); ++r) {
        EXPECT_EQ(predicted.at(train_rows[r].fields[0]), train_rows[r].fields[1]);
    }
}

TEST_F(CliTest, EvaluateMatchesMetricsModule) {
    auto o = boosted_train("e.crm");
    std::ostringstream sink;
    ASSERT_EQ(cmd_train(o, sink), 0);
    EvaluateOptions e;
    e.scores = *o.scores_out;
    e.out_dir = path("report");
    ASSERT_EQ(cmd_evaluate(e, sink), 0);

    ScoredSet s;
    const auto rows = parse_csv(read_file(*o.scores_out));
    for (std::size_t r = 1; r < rows.size(); ++r) {
        s.scores.push_back(*parse_finite_double(rows[r].fields[1]));
        s.labels.push_back(rows[r].fields[2] == "1");
    }
    const auto report = evaluate(s);
    EXPECT_EQ(read_file(e.out_dir / "summary.txt"), summary_text(report));
    EXPECT_EQ(read_file(e.out_dir / "pr.csv"), pr_table(report.pr_points));
    EXPECT_EQ(read_file(e.out_dir / "roc.csv"), roc_table(report.roc_points));
    EXPECT_EQ(read_file(e.out_dir / "lorenz.csv"), lorenz_table(report.lorenz));
}

TEST_F(CliTest, EvaluateWithSeparateLabels) {
    write_file(path("s.csv"), "client_id,score\nC000001,0.9\nC000002,0.1\n");
    write_file(path("l.csv"), "client_id,is_default\nC000002,0\nC000001,1\n");
    EvaluateOptions e;
    e.scores = path("s.csv");
    e.labels = path("l.csv");
    e.out_dir = path("perfect");
    std::ostringstream out;
    ASSERT_EQ(cmd_evaluate(e, out), 0);
    EXPECT_NE(out.str().find("auc = 1\n"), std::string::npos);
    EXPECT_NE(out.str().find("ks = 1\n"), std::string::npos);
}

TEST_F(CliTest, TuneSingleRowMatchesTrain) {
    auto o = boosted_train("t.crm");
    std::ostringstream train_out;
    ASSERT_EQ(cmd_train(o, train_out), 0);
    write_file(path("grid.json"),
               R"({"model": "boosted", "mode": "rows", "seed": 4, "rows": [{"n_rounds": 8, "max_depth": 3}]})");
    TuneOptions t;
    t.grid = path("grid.json");
    t.schema = o.schema;
    t.data_dir = o.data_dir;
    t.out = path("tune.csv");
    std::ostringstream tune_out;
    ASSERT_EQ(cmd_tune(t, tune_out), 0);
    const auto s = train_out.str();
    const auto line = s.substr(s.find("test_auc = ") + 11);
    const auto auc = line.substr(0, line.find('\n'));
    EXPECT_NE(tune_out.str().find("best_val_auc = " + auc + "\n"), std::string::npos);
}

TEST_F(CliTest, ExitCodes) {
    EXPECT_EQ(run("").exit_code, 1);
    EXPECT_EQ(run("train --nope").exit_code, 1);
    const auto d = data().string();

    const auto missing_label = run("train --model forest --no-trees 2 --schema " + d + "/schema.txt --data-dir " + d +
                                   " --label target --out " + path("x.crm").string());
    EXPECT_EQ(missing_label.exit_code, 2);
    EXPECT_NE(missing_label.output.find("target"), std::string::npos);
    EXPECT_EQ(std::count(missing_label.output.begin(), missing_label.output.end(), '\n'), 1);
    EXPECT_EQ(missing_label.output.rfind("error: encode: ", 0), 0u);

    write_file(path("junk.crm"), "CRMODEL");
    const auto bad_model = run("predict --model " + path("junk.crm").string() + " --data " + d + "/app.csv --out " +
                               path("y.csv").string());
    EXPECT_EQ(bad_model.exit_code, 3);

    write_file(path("bad_grid.json"), R"({"model": "boosted", "axes": {"depth": [1, 2]}})");
    const auto bad_grid = run("tune --grid " + path("bad_grid.json").string() + " --schema " + d +
                              "/schema.txt --data-dir " + d + " --out " + path("z.csv").string());
    EXPECT_EQ(bad_grid.exit_code, 1);
    EXPECT_NE(bad_grid.output.find("'depth'"), std::string::npos);

    write_file(path("one_class.csv"), "client_id,score,is_default\na,0.1,0\nb,0.2,0\n");
    EXPECT_EQ(run("evaluate --scores " + path("one_class.csv").string() + " --out-dir " + path("r").string()).exit_code,
              2);

    EXPECT_EQ(run("gen-data --n 10 --out /proc/not_writable").exit_code, 2);
}

TEST_F(CliTest, PredictEmptyFileAndUnseenCategory) {
    auto o = boosted_train("u.crm");
    std::ostringstream sink;
    ASSERT_EQ(cmd_train(o, sink), 0);
    write_file(path("empty.csv"), "");
    PredictOptions p;
    p.model = o.out;
    p.data = path("empty.csv");
    p.out = path("empty_scores.csv");
    ASSERT_EQ(cmd_predict(p, sink), 0);
    EXPECT_EQ(read_file(p.out), "client_id,score\n");

    // Replace one Income value with a category never seen in training.
    auto text = read_file(data() / "app.csv");
    const auto pos = text.find("\nC000001,") + 9;
    text.replace(pos, text.find(',', pos) - pos, "unheard-of");
    fs::create_directories(path("unseen"));
    write_file(path("unseen") / "app.csv", text);
    fs::copy_file(data() / "call_records.csv", path("unseen") / "call_records.csv");
    fs::copy_file(data() / "bureau.csv", path("unseen") / "bureau.csv");
    p.data.reset();
    p.schema = o.schema;
    p.data_dir = path("unseen");
    try {
        cmd_predict(p, sink);
        FAIL();
    } catch (const EncodeError& e) {
        EXPECT_NE(std::string(e.what()).find("unheard-of"), std::string::npos);
    }
}
