#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "common.hpp"

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = dualprice::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

// Everything but the manifest line, which echoes the arguments.
std::string body(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, kept;
  while (std::getline(in, line)) {
    if (line.rfind("# manifest", 0) != 0) kept += line + '\n';
  }
  return kept;
}

}  // namespace

TEST_CASE("solve happy path") {
  const Run r = run({"solve", "--market", "tri1", "--utility", "exp:gamma=1,C=2"});
  CHECK(r.code == 0);
  CHECK(r.out.find("1.03670614172") != std::string::npos);
  CHECK(r.out.find("0.217988353029") != std::string::npos);
  const Run f = run({"solve", "--market", data_file("tri1.json").string()});
  CHECK(f.code == 0);
  CHECK(f.out.find("1.03670614172") != std::string::npos);
}

TEST_CASE("price happy path") {
  const Run r = run({"price", "--market", "tri1", "--claim", "call"});
  CHECK(r.code == 0);
  for (const char* key : {"bid", "offer", "davis", "lp_lower", "lp_upper"}) {
    CHECK(r.out.find(key) != std::string::npos);
  }
  const Run csv = run({"price", "--market", "tri1", "--claim", "call", "--format", "csv"});
  CHECK(csv.code == 0);
  CHECK(csv.out.find(',') != std::string::npos);
}

TEST_CASE("exit codes") {
  CHECK(run({"verify", "--market", "tri1"}).code == 0);
  const Run bad = run({"verify", "--market", "tri1", "--corrupt-dual", "0.01"});
  CHECK(bad.code == 1);
  CHECK(bad.out.find("FAIL") != std::string::npos);
  CHECK(run({"solve", "--market", "arbitrage"}).code == 1);
  CHECK(run({"solve", "--market", data_file("bad_probs.json").string()}).code == 2);
  CHECK(run({"solve", "--market", data_file("malformed.json").string()}).code == 2);
  CHECK(run({"solve", "--market", "tri1", "--utility", "twopower:a=2,b=1"}).code == 2);
  CHECK(run({"price", "--market", "tri1", "--claim", "nosuchclaim"}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"solve"}).code == 2);
  CHECK(run({"certify", "--utility", "twopower:a=0.5,b=1,C=1"}).code == 0);
}

TEST_CASE("csv output is deterministic") {
  const std::vector<std::string> args{"oracle", "--market", "tri1", "--seed", "7", "--format", "csv",
                                      "--workers", "3"};
  const Run a = run(args), b = run(args);
  CHECK(a.code == 0);
  CHECK(a.out == b.out);
  const std::vector<std::string> curve{"curve", "--market", "tri2", "--claim", "call", "--format", "csv",
                                       "--workers", "4"};
  const Run c1 = run(curve);
  std::vector<std::string> curve1 = curve;
  curve1.back() = "1";
  CHECK(body(c1.out) == body(run(curve1).out));
  CHECK(body(c1.out).size() > 100);
}

TEST_CASE("out-dir writes a manifest") {
  const auto dir = std::filesystem::temp_directory_path() / "dualprice_cli_test";
  std::filesystem::remove_all(dir);
  const Run r = run({"solve", "--market", "bin1", "--out-dir", dir.string()});
  CHECK(r.code == 0);
  CHECK(std::filesystem::exists(dir / "manifest.json"));
  std::ifstream in(dir / "manifest.json");
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(ss.str().find("\"seed\"") != std::string::npos);
  std::filesystem::remove_all(dir);
}
