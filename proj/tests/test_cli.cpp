#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include <unistd.h>

#include "ctsmc/cli.hpp"
#include "ctsmc/model.hpp"
#include "ctsmc/pathio.hpp"
#include "ctsmc/report.hpp"
#include "test_support.hpp"

using namespace ctsmc;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path dir;
  TempDir() {
    dir = fs::temp_directory_path() / ("ctsmc_test_" + std::to_string(::getpid()) + "_" +
                                       std::to_string(counter()++));
    fs::create_directories(dir);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string file(const std::string& name) const { return (dir / name).string(); }
};

std::string write_cpg_model(const TempDir& tmp, double lambda = 2.0) {
  std::string path = tmp.file("model.toml");
  std::ofstream out(path);
  out << "[alphabet]\nsymbols = \"ACGT\"\n"
      << "[base_rates]\nmatrix = [[0,1,1,1],[1,0,1,1],[1,1,0,1],[1,1,1,0]]\n"
      << "[context]\nvariant = \"neighborhood\"\nk = 2\n"
      << "[multiplier]\nkind = \"cpg\"\nlambda = " << lambda << "\n";
  return path;
}

std::string slurp_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("exact subcommand produces the oracle value") {
  TempDir tmp;
  std::string model = write_cpg_model(tmp);
  std::string out = tmp.file("report.json");
  int code = cli::run({"exact", "--model", model, "--from", "ACGT", "--to", "ATGT", "--T", "0.25",
                       "--tol", "1e-12", "--out", out});
  CHECK(code == 0);
  Json rep = Json::parse(slurp_file(out));
  CHECK(rep["tool"] == "exact");
  CHECK(rep["result"]["p"].get<double>() == doctest::Approx(2.733456217681295e-02).epsilon(1e-9));
  CHECK(rep["result"].contains("truncation_order"));
  CHECK(rep["result"].contains("Lambda"));
  CHECK(rep["config"]["subcommand"] == "exact");
}

TEST_CASE("reports are byte-identical across runs and thread counts") {
  TempDir tmp;
  std::string model = write_cpg_model(tmp);
  auto run_to = [&](const std::string& name, const std::string& threads) {
    std::string out = tmp.file(name);
    int code = cli::run({"estimate-smc", "--model", model, "--from", "ACGT", "--to", "ATGT",
                         "--T", "0.25", "-N", "128", "--seed", "7", "--threads", threads,
                         "--out", out});
    REQUIRE(code == 0);
    return slurp_file(out);
  };
  std::string a = run_to("a.json", "1");
  std::string b = run_to("b.json", "1");
  std::string c = run_to("c.json", "2");
  CHECK(a == b);
  // the config echo records the thread count; the numbers must not move
  CHECK(Json::parse(a)["result"].dump() == Json::parse(c)["result"].dump());
}

TEST_CASE("validation failures exit with code 2") {
  TempDir tmp;
  std::string model = write_cpg_model(tmp);
  CHECK(cli::run({"exact", "--model", model, "--from", "ACGT", "--to", "ATGT", "--T", "-1"}) == 2);
  CHECK(cli::run({"exact", "--from", "ACGT", "--to", "ATGT", "--T", "0.25"}) == 2);
  CHECK(cli::run({"exact", "--model", model, "--badflag"}) == 2);
  CHECK(cli::run({"estimate-smc", "--model", model, "--from", "ACGT", "--to", "ATGT", "--T",
                  "0.25", "--ladder-file", tmp.file("nope.lad"), "--safety", "0.5"}) == 2);
}

TEST_CASE("state-space cap exceeded exits with code 4") {
  TempDir tmp;
  std::string model = write_cpg_model(tmp);
  CHECK(cli::run({"exact", "--model", model, "--from", "ACGTACGTACGT", "--to", "ACGTACGTACGT",
                  "--T", "0.1"}) == 4);
}

TEST_CASE("config file values merge under flags with provenance") {
  TempDir tmp;
  std::string model = write_cpg_model(tmp);
  std::string cfg = tmp.file("run.toml");
  {
    std::ofstream out(cfg);
    out << "model = \"" << model << "\"\nfrom = \"ACGT\"\nto = \"ATGT\"\nT = 0.25\nN = 64\n";
  }
  std::string out = tmp.file("is.json");
  int code = cli::run({"estimate-is", "--config", cfg, "-N", "32", "--seed", "3", "--out", out});
  REQUIRE(code == 0);
  Json rep = Json::parse(slurp_file(out));
  CHECK(rep["result"]["N"] == 32);  // the flag wins
  CHECK(rep["config"]["provenance"]["N"] == "flag (overrides file)");
  CHECK(rep["config"]["provenance"]["model"] == "file");

  std::string bad_cfg = tmp.file("bad.toml");
  {
    std::ofstream outc(bad_cfg);
    outc << "model = \"" << model << "\"\nnot_a_key = 1\n";
  }
  CHECK(cli::run({"estimate-is", "--config", bad_cfg, "--from", "ACGT", "--to", "ATGT", "--T",
                  "0.25"}) == 2);
}

TEST_CASE("sample-ism writes a loadable dump") {
  TempDir tmp;
  std::string model = write_cpg_model(tmp);
  std::string dump = tmp.file("paths.tsv");
  std::string out = tmp.file("ism.json");
  int code = cli::run({"sample-ism", "--model", model, "--from", "ACGT", "--to", "ATGT", "--T",
                       "0.25", "--n-draws", "50", "--seed", "2", "--dump", dump, "--out", out});
  REQUIRE(code == 0);
  ContextModel m = load_model(model);
  auto paths = load_paths(dump, m);
  CHECK(paths.size() == 50);
  Sequence x = parse_sequence("ACGT", m.alphabet), y = parse_sequence("ATGT", m.alphabet);
  for (const auto& p : paths) CHECK(validate(p, x, y).ok());
}

TEST_CASE("sample-mcmc writes a trace and summary") {
  TempDir tmp;
  std::string model = write_cpg_model(tmp);
  std::string trace = tmp.file("trace.tsv");
  std::string out = tmp.file("mcmc.json");
  int code = cli::run({"sample-mcmc", "--model", model, "--from", "ACGT", "--to", "ATGT", "--T",
                       "0.25", "--steps", "200", "--thin", "10", "--seed", "5", "--trace", trace,
                       "--out", out});
  REQUIRE(code == 0);
  Json rep = Json::parse(slurp_file(out));
  CHECK(rep["result"]["steps"] == 200);
  CHECK(rep["result"]["acceptance_rate"].get<double>() > 0.0);
  CHECK(rep["result"]["partition"]["island"].is_boolean());
  std::string tsv = slurp_file(trace);
  CHECK(tsv.rfind("step\tm\tlog_q", 0) == 0);
  // header + init row + 20 thinned rows
  CHECK(std::count(tsv.begin(), tsv.end(), '\n') == 22);
}

TEST_CASE("csv format emits a flat two-line report") {
  TempDir tmp;
  std::string model = write_cpg_model(tmp);
  std::string out = tmp.file("exact.csv");
  int code = cli::run({"exact", "--model", model, "--from", "ACGT", "--to", "ATGT", "--T", "0.25",
                       "--format", "csv", "--out", out});
  REQUIRE(code == 0);
  std::string csv = slurp_file(out);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
  CHECK(csv.rfind("tool,version,format,", 0) == 0);
  CHECK(csv.find("result.p") != std::string::npos);
}

TEST_CASE("report envelope round-trips through serialization") {
  Json config;
  config["subcommand"] = "demo";
  config["N"] = 12;
  Json result;
  result["value"] = 0.125;
  result["list"] = Json::array({1.5, 2.5});
  Json rep = make_report("demo", config, result);
  Json back = Json::parse(render_report(rep, "json"));
  CHECK(back == rep);
  CHECK(back.dump() == rep.dump());
}

TEST_CASE("check-bounds runs end to end") {
  TempDir tmp;
  std::string model = write_cpg_model(tmp);
  std::string out = tmp.file("bounds.json");
  int code = cli::run({"check-bounds", "--model", model, "--from", "TTCATT", "--to", "TTTGTT",
                       "--T", "0.3333333333333333", "--n-samples", "2000", "--seed", "9", "--out",
                       out});
  REQUIRE(code == 0);
  Json rep = Json::parse(slurp_file(out));
  const auto& lam = rep["result"]["lambda_theta"]["lambda"];
  CHECK((lam.is_number() || lam == "inf"));
  CHECK(rep["result"]["lambda_theta"]["log_lambda"].is_number());
  const auto& mix = rep["result"]["mixing_time_bound"]["log_value"];
  CHECK((mix.is_number() || mix == "inf"));
  for (const auto& chk : rep["result"]["mgf_checks"]) CHECK(chk["pass"] == true);
  CHECK(rep["result"]["l2_ladder"]["all_within_bound"] == true);
}

TEST_CASE("mcmc dump feeds the sampled bound checks") {
  TempDir tmp;
  std::string model = write_cpg_model(tmp);
  std::string dump = tmp.file("chain_paths.tsv");
  int code = cli::run({"sample-mcmc", "--model", model, "--from", "ACGT", "--to", "ATGT", "--T",
                       "0.25", "--steps", "2000", "--thin", "4", "--seed", "11", "--dump", dump,
                       "--out", tmp.file("chain.json")});
  REQUIRE(code == 0);
  ContextModel m = load_model(model);
  auto paths = load_paths(dump, m);
  CHECK(paths.size() == 500);
  std::string out = tmp.file("bounds_from_chain.json");
  code = cli::run({"check-bounds", "--model", model, "--from", "ACGT", "--to", "ATGT", "--T",
                   "0.25", "--samples", dump, "--out", out});
  REQUIRE(code == 0);
  Json rep = Json::parse(slurp_file(out));
  for (const auto& chk : rep["result"]["mgf_checks"]) CHECK(chk["pass"] == true);
}

TEST_CASE("estimate-smc replicates report a spread") {
  TempDir tmp;
  std::string model = write_cpg_model(tmp);
  std::string out = tmp.file("reps.json");
  int code = cli::run({"estimate-smc", "--model", model, "--from", "ACGT", "--to", "ATGT", "--T",
                       "0.25", "-N", "128", "--replicates", "4", "--seed", "21", "--out", out});
  REQUIRE(code == 0);
  Json rep = Json::parse(slurp_file(out));
  CHECK(rep["result"]["replicates"].size() == 4);
  CHECK(rep["result"]["replicate_se_z"].get<double>() > 0.0);
}

TEST_CASE("estimate-is batch mode emits one row per case") {
  TempDir tmp;
  std::string model = write_cpg_model(tmp);
  std::string batch = tmp.file("batch.tsv");
  {
    std::ofstream out(batch);
    out << "ACGT\tATGT\t0.25\nACGT\tACGT\t0.1\n";
  }
  std::string out = tmp.file("batch.json");
  int code = cli::run({"estimate-is", "--model", model, "--batch", batch, "-N", "64", "--seed",
                       "4", "--out", out});
  REQUIRE(code == 0);
  Json rep = Json::parse(slurp_file(out));
  REQUIRE(rep["result"]["rows"].size() == 2);
  CHECK(rep["result"]["rows"][0]["T"] == 0.25);
  CHECK(rep["result"]["rows"][1]["T"] == 0.1);
}
