#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ising_cli/app.hpp"

using namespace ising;
using namespace ising::cli;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome invoke(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

RunConfig parsed(const std::vector<std::string>& args) {
  std::ostringstream sink;
  auto c = parse_config(args, sink);
  if (!c) throw std::runtime_error("no config");
  return *c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "ising_cli_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(ParseConfig, SimulateExample) {
  const auto c = parsed({"simulate", "--n", "8", "--j-hat", "0.5", "--m", "1000000", "--seed", "7"});
  EXPECT_EQ(c.command, "simulate");
  EXPECT_EQ(c.n_list, std::vector<std::size_t>{8});
  EXPECT_EQ(c.j_list.front(), Coupling(0.5));
  EXPECT_EQ(c.steps_for(8), 1000000u);
  EXPECT_EQ(c.seed, 7u);
}

TEST(ParseConfig, InfinitySentinel) {
  const auto c = parsed({"spectra", "--j-hat", "inf", "--m", "100", "--n", "16"});
  EXPECT_TRUE(c.j_list.front().is_infinite());
  EXPECT_EQ(invoke({"spectra", "--j-hat", "Inf", "--n", "8"}).code, kExitUsage);
  EXPECT_EQ(invoke({"spectra", "--j-hat", "infinity", "--n", "8"}).code, kExitUsage);
}

TEST(ParseConfig, KernelCapRejected) {
  const auto r = invoke({"kernel-verify", "--n", "20"});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("cap"), std::string::npos);
}

TEST(ParseConfig, InvalidCombinations) {
  EXPECT_EQ(invoke({}).code, kExitUsage);
  EXPECT_EQ(invoke({"bogus"}).code, kExitUsage);
  EXPECT_EQ(invoke({"kernel-verify", "--n", "6", "--j-hat", "inf"}).code, kExitUsage);
  EXPECT_EQ(invoke({"lsi-verify", "--n", "6", "--j-hat", "inf"}).code, kExitUsage);
  EXPECT_EQ(invoke({"hitting", "--n", "8", "--j-hat", "0.5"}).code, kExitUsage);
  EXPECT_EQ(invoke({"simulate", "--n", "8", "--j-hat", "inf", "--init", "stationary"}).code, kExitUsage);
  EXPECT_EQ(invoke({"simulate", "--n", "8", "--j-hat", "inf", "--dynamics", "glauber"}).code, kExitUsage);
  EXPECT_EQ(invoke({"simulate", "--n", "1"}).code, kExitUsage);
  EXPECT_EQ(invoke({"simulate", "--n", "abc"}).code, kExitUsage);
  EXPECT_EQ(invoke({"simulate", "--m", "10", "--m-power", "2"}).code, kExitUsage);
  EXPECT_EQ(invoke({"simulate", "--dynamics", "metropolis"}).code, kExitUsage);
  EXPECT_EQ(invoke({"simulate", "--n", "4", "--init", "+-+"}).code, kExitUsage);
  EXPECT_EQ(invoke({"simulate", "--unknown-flag", "1"}).code, kExitUsage);
  EXPECT_EQ(invoke({"simulate", "--threads", "0"}).code, kExitUsage);
}

TEST(ParseConfig, HelpAndVersion) {
  const auto h = invoke({"--help"});
  EXPECT_EQ(h.code, kExitOk);
  EXPECT_NE(h.out.find("--j-hat"), std::string::npos);
  const auto v = invoke({"--version"});
  EXPECT_EQ(v.code, kExitOk);
  EXPECT_EQ(v.out, std::string(ISING_VERSION) + "\n");
}

TEST(ParseConfig, ConfigFileAndOverride) {
  const auto path = scratch("run.cfg");
  {
    std::ofstream f(path);
    f << "# comment\ncommand=spectra\nn-list=8,16\nj-hat=inf\nm=200\nseed=5\n";
  }
  const auto c = parsed({"--config", path.string()});
  EXPECT_EQ(c.command, "spectra");
  EXPECT_EQ(c.n_list, (std::vector<std::size_t>{8, 16}));
  EXPECT_TRUE(c.j_list.front().is_infinite());
  EXPECT_EQ(c.seed, 5u);
  const auto o = parsed({"--config", path.string(), "--seed", "9", "--m", "300"});
  EXPECT_EQ(o.seed, 9u);
  EXPECT_EQ(o.steps_for(8), 300u);

  const auto bad = scratch("bad.cfg");
  {
    std::ofstream f(bad);
    f << "command=spectra\nbogus=1\n";
  }
  EXPECT_EQ(invoke({"--config", bad.string()}).code, kExitUsage);
  EXPECT_EQ(invoke({"spectra", "--config", scratch("missing.cfg").string()}).code, kExitUsage);
}

TEST(ParseConfig, HashIgnoresThreadsAndOutput) {
  const auto a = parsed({"spectra", "--n", "8", "--threads", "1"});
  const auto b = parsed({"spectra", "--n", "8", "--threads", "3", "--output", "/tmp/x"});
  const auto c = parsed({"spectra", "--n", "8", "--seed", "2"});
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_NE(a.hash(), c.hash());
}

TEST(ParseConfig, ThreadsFromEnvironment) {
  setenv("ISING_THREADS", "3", 1);
  EXPECT_EQ(parsed({"spectra"}).threads, 3u);
  EXPECT_EQ(parsed({"spectra", "--threads", "2"}).threads, 2u);
  unsetenv("ISING_THREADS");
}

TEST(Run, KernelVerifyPasses) {
  const auto r = invoke({"kernel-verify", "--n", "6", "--j-hat", "1"});
  EXPECT_EQ(r.code, kExitOk) << r.out << r.err;
  EXPECT_NE(r.out.find("detailed-balance max-violation: "), std::string::npos);
  EXPECT_NE(r.out.find("n,j_hat,row_sum_error"), std::string::npos);
  EXPECT_NE(r.out.find("\n6,1,"), std::string::npos);
}

TEST(Run, KernelVerifyGridWithTightToleranceFails) {
  const auto r = invoke({"kernel-verify", "--n-list", "4,5", "--j-list", "0.5,1", "--tol", "1e-30"});
  EXPECT_EQ(r.code, kExitCertification);
}

TEST(Run, LsiVerifyWritesHistogram) {
  const auto prefix = scratch("lsi").string();
  const auto r = invoke({"lsi-verify", "--n-list", "3,4", "--j-list", "0,1", "--replicas", "50", "--output", prefix,
                         "--threads", "2"});
  EXPECT_EQ(r.code, kExitOk) << r.out << r.err;
  const auto hist = slurp(prefix + "_slack_hist.csv");
  EXPECT_EQ(hist.rfind("inequality,bin_lo,bin_hi,count\n", 0), 0u);
  EXPECT_NE(hist.find("poincare,0.95,1,"), std::string::npos);
  EXPECT_NE(hist.find("log_sobolev,1,inf,0\n"), std::string::npos);
  EXPECT_NE(hist.find("# config_hash="), std::string::npos);
  const auto rows = slurp(prefix + "_lsi_functions.csv");
  EXPECT_EQ(rows.rfind("n,j_hat,family,lhs,rhs,slack,pass\n", 0), 0u);
  EXPECT_EQ(rows.find(",0\n"), std::string::npos);
}

TEST(Run, HittingCsv) {
  const auto r = invoke({"hitting", "--n", "12", "--j-hat", "inf", "--replicas", "200"});
  EXPECT_EQ(r.code, kExitOk) << r.out << r.err;
  std::istringstream is(r.out);
  std::string line;
  std::size_t rows = 0;
  bool in_csv = false;
  while (std::getline(is, line)) {
    if (line.rfind("n,replica,initial,c_tilde,hit_index", 0) == 0) {
      in_csv = true;
      continue;
    }
    if (!in_csv || line.empty() || line[0] == '#') continue;
    ++rows;
    EXPECT_EQ(line.substr(line.size() - 4), ",1,1") << line;
  }
  EXPECT_EQ(rows, 200u);
}

TEST(Run, SpectraAtInfinity) {
  const auto r = invoke({"spectra", "--j-hat", "inf", "--m", "1600", "--n", "16"});
  EXPECT_EQ(r.code, kExitOk) << r.out << r.err;
  EXPECT_NE(r.out.find("\n16,inf,1600,1,"), std::string::npos);
  EXPECT_NE(r.out.find(",1,na,na\n"), std::string::npos);
}

TEST(Run, SweepSmallGrid) {
  const auto r = invoke({"sweep", "--n-list", "4,8", "--j-hat", "0.5", "--m-power", "3"});
  EXPECT_EQ(r.code, kExitOk) << r.out << r.err;
  EXPECT_NE(r.out.find("monotone j_hat=0.5 seed=1: pass"), std::string::npos);
  EXPECT_NE(r.out.find("\n8,0.5,512,1,"), std::string::npos);
}

TEST(Run, SimulateOutputIsReproducible) {
  const auto a = scratch("sim_a").string();
  const auto b = scratch("sim_b").string();
  const std::vector<std::string> base = {"simulate", "--n-list", "6,8", "--j-list", "0.5,inf", "--m", "20000",
                                         "--replicas", "3", "--seed", "7", "--init", "uniform"};
  auto args_a = base;
  args_a.insert(args_a.end(), {"--output", a, "--threads", "1"});
  auto args_b = base;
  args_b.insert(args_b.end(), {"--output", b, "--threads", "3"});
  ASSERT_EQ(invoke(args_a).code, kExitOk);
  ASSERT_EQ(invoke(args_b).code, kExitOk);
  const auto ca = slurp(a + ".csv");
  EXPECT_EQ(ca, slurp(b + ".csv"));
  EXPECT_EQ(ca.rfind("n,j_hat,dynamics,replica,m,", 0), 0u);
  EXPECT_NE(ca.find("# version=" ISING_VERSION "\n# config_hash="), std::string::npos);
  EXPECT_NE(ca.find("\n6,inf,wolff,2,20000,"), std::string::npos);
  EXPECT_EQ(ca.find('\r'), std::string::npos);
  EXPECT_EQ(ca.back(), '\n');
}

TEST(Run, SimulateExactReferenceColumn) {
  const auto r = invoke({"simulate", "--n", "8", "--j-hat", "0.5", "--m", "200000", "--seed", "3"});
  ASSERT_EQ(r.code, kExitOk);
  const auto pos = r.out.find("\n8,0.5,wolff,0,200000,");
  ASSERT_NE(pos, std::string::npos);
  std::string line = r.out.substr(pos + 1, r.out.find('\n', pos + 1) - pos - 1);
  std::vector<std::string> fields;
  std::stringstream ss(line);
  for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
  ASSERT_EQ(fields.size(), 9u);
  EXPECT_NEAR(std::stod(fields[7]), std::stod(fields[8]), 0.02);
  EXPECT_NEAR(std::stod(fields[8]), two_point_correlation(1, 2, ModelParams(8, 0.5)), 1e-15);
}

TEST(Run, UnwritableOutputIsResourceError) {
  const auto r = invoke({"hitting", "--n", "8", "--replicas", "2", "--output", "/nonexistent_dir/x"});
  EXPECT_EQ(r.code, kExitResource);
}
