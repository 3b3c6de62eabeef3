#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "mbpi/cli.hpp"
#include "mbpi/model_io.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
  json doc() const { return json::parse(out); }
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  Run r;
  r.code = mbpi::cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path temp_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("mbpi-cli-" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("validate a bundled model") {
  const auto r = run({"validate", "--fixture", "M3"});
  CHECK(r.code == mbpi::cli::kExitOk);
  const auto d = r.doc();
  CHECK(d["command"] == "validate");
  CHECK(d["model"].is_string());
  CHECK(d.contains("result"));
}

TEST_CASE("extinction from the command line") {
  const auto r = run({"extinction", "--fixture", "M2", "--from", "1"});
  REQUIRE(r.code == 0);
  const auto d = r.doc();
  CHECK(std::abs(d["result"]["a_i0"].get<double>() - (1.0 - 2.0 / 3.141592653589793)) <= 1e-8);
  CHECK_FALSE(d["warnings"].empty());
}

TEST_CASE("exit codes") {
  CHECK(run({"mean-time", "--fixture", "M2", "--from", "1"}).code == mbpi::cli::kExitPrecondition);
  CHECK(run({"validate", "--fixture", "M9"}).code == mbpi::cli::kExitInput);
  CHECK(run({"frobnicate"}).code == mbpi::cli::kExitInput);
  CHECK(run({"extinction", "--fixture", "M2"}).code == mbpi::cli::kExitInput);
  CHECK(run({"validate", "--model", "/nonexistent/model.json"}).code == mbpi::cli::kExitInput);

  const auto dir = temp_dir("codes");
  write(dir / "neg.json", R"({"n":1,"immigration":{"entries":[{"j":[1],"rate":-1}]},
    "branch":[{"entries":[{"j":[0],"rate":1},{"j":[2],"rate":1}]}]})");
  const auto neg = run({"validate", "--model", (dir / "neg.json").string()});
  CHECK(neg.code == mbpi::cli::kExitInput);
  CHECK(neg.doc()["error"]["code"] == "NegativeRate");

  write(dir / "sing.json", R"({"n":2,"immigration":{"entries":[{"j":[1,0],"rate":1}]},
    "branch":[{"entries":[{"j":[0,1],"rate":1}]},{"entries":[{"j":[1,0],"rate":1}]}]})");
  const auto sing = run({"validate", "--model", (dir / "sing.json").string()});
  CHECK(sing.code == mbpi::cli::kExitInput);
  CHECK(sing.doc()["error"]["code"] == "Singular");
  fs::remove_all(dir);
}

TEST_CASE("fixture files carry the same digest as the bundled models") {
  const auto dir = temp_dir("fixtures");
  const auto r = run({"fixtures", "--out", dir.string()});
  REQUIRE(r.code == 0);
  for (const char* name : {"M1", "M2", "M3", "M4", "A2"}) {
    const fs::path f = dir / (std::string(name) + ".json");
    REQUIRE(fs::exists(f));
    const auto fromFile = run({"validate", "--model", f.string()});
    const auto bundled = run({"validate", "--fixture", name});
    CHECK(fromFile.code == 0);
    CHECK(fromFile.doc()["model"] == bundled.doc()["model"]);
    CHECK(fromFile.doc()["model"] == mbpi::digest_hex(slurp(f)));
  }
  fs::remove_all(dir);
}

TEST_CASE("OUTPUT_PLAIN selects compact JSON") {
  ::setenv("OUTPUT_PLAIN", "1", 1);
  const auto plain = run({"classify", "--fixture", "M1"});
  ::unsetenv("OUTPUT_PLAIN");
  const auto pretty = run({"classify", "--fixture", "M1"});
  CHECK(plain.out.find('\n') == plain.out.size() - 1);
  CHECK(pretty.out.find("\n  ") != std::string::npos);
  CHECK(plain.doc() == pretty.doc());
}

TEST_CASE("curve and path CSV exports") {
  const auto dir = temp_dir("csv");
  const auto curve = (dir / "curve.csv").string();
  REQUIRE(run({"extinction", "--fixture", "M3", "--from", "1,0", "--curve-csv", curve}).code == 0);
  CHECK(slurp(curve).rfind("u,u_2,B_1,A\r\n", 0) == 0);

  const auto paths = (dir / "paths.csv").string();
  const auto sim = run({"simulate", "--fixture", "M1", "--from", "1", "--t-max", "1", "--replicates", "20",
                        "--seed", "3", "--threads", "1", "--paths-csv", paths, "--paths", "2"});
  REQUIRE(sim.code == 0);
  CHECK(slurp(paths).rfind("replicate,time,x1\r\n", 0) == 0);
  CHECK(sim.doc()["result"]["replicates"] == 20);
  fs::remove_all(dir);
}

TEST_CASE("check passes on M1 and is reproducible") {
  const std::vector<std::string> args = {"check", "--fixture", "M1", "--replicates", "2000", "--threads", "2"};
  const auto a = run(args);
  const auto b = run(args);
  CHECK(a.code == mbpi::cli::kExitOk);
  CHECK(a.out == b.out);
  CHECK(a.doc()["result"]["passed"] == true);
}
