#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "dacart/serialize.hpp"
#include "support.hpp"

using namespace dacart;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  fs::path dir;

  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir = fs::temp_directory_path() / (std::string("dacart_cli_") + info->name());
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  std::string path(const std::string& name) const { return (dir / name).string(); }

  Outcome run(const std::string& args) const {
    const std::string out = path("stdout.txt"), err = path("stderr.txt");
    const std::string cmd =
        std::string("\"") + DACART_CLI_PATH + "\" " + args + " >" + out + " 2>" + err;
    const int status = std::system(cmd.c_str());
    Outcome r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
  }

  std::string write(const std::string& name, const Dataset& d) const {
    std::ofstream f(path(name));
    write_csv(f, d);
    return path(name);
  }

  // Source with a response; target with the same features shifted on x1.
  void write_pair() const {
    write("source.csv", fixtures::random_regression(300, 3, 1));
    Dataset tgt = fixtures::random_regression(300, 3, 2);
    tgt.response.reset();
    for (auto& v : tgt.columns[0]) v += 0.8;
    write("target.csv", tgt);
  }
};

}  // namespace

TEST_F(Cli, HelpAndParseErrors) {
  EXPECT_EQ(run("--help").code, 0);
  EXPECT_EQ(run("fit --help").code, 0);
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("no-such-command").code, 2);
  EXPECT_EQ(run("fit --bogus-flag 1").code, 2);
  EXPECT_EQ(run("fit --source x.csv --out m.json --model forest").code, 2);
}

TEST_F(Cli, DaModelsRequireTarget) {
  write_pair();
  const Outcome r = run("fit --source " + path("source.csv") + " --out " + path("m.json"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("requires --target"), std::string::npos) << r.err;
}

TEST_F(Cli, MissingFileIsValidationError) {
  EXPECT_EQ(run("predict --model " + path("none.json") + " --rows " + path("none.csv")).code, 2);
}

TEST_F(Cli, FitThenPredictMatchesLibrary) {
  write_pair();
  const Outcome fit = run("fit --model da-cart --source " + path("source.csv") + " --target " +
                      path("target.csv") + " --rounds 15 --seed 7 --out " + path("m.json") +
                      " --dump-tree " + path("tree.json"));
  ASSERT_EQ(fit.code, 0) << fit.err;
  EXPECT_NE(fit.err.find("seed: 7"), std::string::npos);
  EXPECT_TRUE(fs::exists(path("m.json.report.json")));
  EXPECT_TRUE(fs::exists(path("tree.json")));
  const Json manifest = read_json(path("m.json.manifest.json"));
  EXPECT_EQ(manifest.at("seed"), 7);
  EXPECT_EQ(manifest.at("outputs").size(), 3u);

  const Outcome pred = run("predict --model " + path("m.json") + " --rows " + path("target.csv") +
                       " --out " + path("pred.csv"));
  ASSERT_EQ(pred.code, 0) << pred.err;
  const Dataset got = parse_dataset(path("pred.csv"));
  const ModelFile m = load_model(path("m.json"));
  const Dataset target = parse_dataset(path("target.csv"));
  const auto expect = m.predict(target);
  ASSERT_EQ(got.rows(), expect.size());
  for (std::size_t i = 0; i < expect.size(); ++i)
    EXPECT_EQ(format_double(got.columns[0][i]), format_double(expect[i]));

  const Json report = read_json(path("m.json.report.json"));
  EXPECT_TRUE(report.contains("selection"));
  EXPECT_EQ(report.at("weights").at("n"), 300);
}

TEST_F(Cli, UnitEstimatorMatchesCartOnSelectedFeatures) {
  write_pair();
  ASSERT_EQ(run("fit --model da-cart --estimator unit --source " + path("source.csv") +
                " --target " + path("target.csv") + " --out " + path("da.json"))
                .code,
            0);
  const Json report = read_json(path("da.json.report.json"));
  std::string features;
  for (const auto& f : report.at("selection").at("selected")) {
    if (!features.empty()) features += ',';
    features += f.get<std::string>();
  }
  ASSERT_FALSE(features.empty());
  ASSERT_EQ(run("fit --model cart --features " + features + " --source " + path("source.csv") +
                " --out " + path("cart.json"))
                .code,
            0);
  ASSERT_EQ(run("predict --model " + path("da.json") + " --rows " + path("target.csv")).code, 0);
  const std::string a = slurp(path("stdout.txt"));
  ASSERT_EQ(run("predict --model " + path("cart.json") + " --rows " + path("target.csv")).code,
            0);
  EXPECT_EQ(slurp(path("stdout.txt")), a);
}

TEST_F(Cli, PredictOnHeaderOnlyRows) {
  write_pair();
  ASSERT_EQ(run("fit --model cart --source " + path("source.csv") + " --out " + path("m.json"))
                .code,
            0);
  std::ofstream(path("empty.csv")) << "x1,x2,x3\n";
  const Outcome r = run("predict --model " + path("m.json") + " --rows " + path("empty.csv"));
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "prediction\n");
}

TEST_F(Cli, PredictRejectsSchemaMismatch) {
  write_pair();
  ASSERT_EQ(run("fit --model cart --source " + path("source.csv") + " --out " + path("m.json"))
                .code,
            0);
  std::ofstream(path("other.csv")) << "a,b\n1,2\n";
  EXPECT_EQ(run("predict --model " + path("m.json") + " --rows " + path("other.csv")).code, 2);
}

TEST_F(Cli, WeightsCsvLayout) {
  write_pair();
  const Outcome r = run("weights --source " + path("source.csv") + " --target " +
                    path("target.csv") + " --rounds 10 --out " + path("w.csv"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("ess="), std::string::npos);
  std::ifstream in(path("w.csv"));
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "row,propensity,raw_odds,weight");
  const Dataset w = parse_dataset(path("w.csv"));
  ASSERT_EQ(w.rows(), 300u);
  double sum = 0.0;
  for (double v : w.columns[w.index_of("weight")]) sum += v;
  EXPECT_NEAR(sum, 300.0, 1e-6);
  EXPECT_TRUE(fs::exists(path("w.csv.manifest.json")));
}

TEST_F(Cli, ImportanceListsEveryFeature) {
  write_pair();
  const Outcome r = run("importance --source " + path("source.csv"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "feature,share,selected");
  EXPECT_NE(r.out.find("\nx1,"), std::string::npos);
  EXPECT_NE(r.out.find("\nx3,"), std::string::npos);
}

TEST_F(Cli, SimulateHonoursOverrides) {
  const std::string cfg = std::string(DACART_CONFIG_DIR) + "/restricted_x1.cfg";
  const Outcome r = run("simulate --config " + cfg + " --reps 2 --n 300" +
                    " --set sample.n_target_test=400 --workers 1 --out " + path("sim.csv") +
                    " --summary " + path("sum.csv"));
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream in(path("sim.csv"));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "scenario,replication,model,estimator,n_source,metric,value");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    EXPECT_NE(line.find(",300,rmse,"), std::string::npos) << line;
  }
  EXPECT_EQ(rows, 2u * 5u);  // replications x configured models
  EXPECT_TRUE(fs::exists(path("sum.csv")));
  const Json manifest = read_json(path("sim.csv.manifest.json"));
  EXPECT_NE(manifest.at("config").at("scenario").get<std::string>().find("n_target_test = 400"),
            std::string::npos);
}

TEST_F(Cli, SimulateRejectsBadOverride) {
  const std::string cfg = std::string(DACART_CONFIG_DIR) + "/restricted_x1.cfg";
  EXPECT_EQ(run("simulate --config " + cfg + " --set nope=1 --out " + path("s.csv")).code, 2);
}

TEST_F(Cli, BiasDemoPrintsSummary) {
  const Outcome r = run("bias-demo --reps 3 --out " + path("bd.csv"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "replications,mean_mse_ols,mean_mse_cart,ratio");
  const Dataset per_rep = parse_dataset(path("bd.csv"));
  EXPECT_EQ(per_rep.rows(), 3u);
}
