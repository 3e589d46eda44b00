#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <json.hpp>

#include "floquet_lab/network_io.hpp"
#include "test_util.hpp"

using namespace flab;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Run {
  int code;
  std::string out, err;

  json error_json() const {
    // Usage errors print help first; the JSON object is always the last line.
    std::string s = err;
    while (!s.empty() && s.back() == '\n') s.pop_back();
    return json::parse(s.substr(s.rfind('\n') == std::string::npos ? 0 : s.rfind('\n') + 1));
  }
};

class Sandbox {
 public:
  Sandbox() : dir_(fs::temp_directory_path() / ("flab_cli_" + std::to_string(std::random_device{}()))) {
    fs::create_directories(dir_);
  }
  ~Sandbox() { fs::remove_all(dir_); }
  const fs::path& dir() const { return dir_; }

  Run run(const std::string& args) const {
    const char* bin = std::getenv("FLOQUET_LAB_BIN");
    REQUIRE_MESSAGE(bin != nullptr, "FLOQUET_LAB_BIN not set");
    const std::string cmd = "cd '" + dir_.string() + "' && '" + bin + "' " + args + " > stdout.txt 2> stderr.txt";
    const int status = std::system(cmd.c_str());
    REQUIRE(WIFEXITED(status));
    return {WEXITSTATUS(status), slurp(dir_ / "stdout.txt"), slurp(dir_ / "stderr.txt")};
  }

  void write(const std::string& name, const std::string& text) const { std::ofstream(dir_ / name) << text; }

 private:
  fs::path dir_;
};

void write_small_net(const fs::path& p) {
  std::mt19937_64 rng(11);
  write_weights(test::random_mlp(rng, {2, 6, 2}, ActivationKind::Tanh), p);
}

}  // namespace

TEST_CASE("cli: usage errors exit 1 with a JSON message") {
  Sandbox sb;
  const auto none = sb.run("");
  CHECK(none.code == 1);
  CHECK(none.error_json().at("error") == "usage");

  const auto bogus = sb.run("bogus");
  CHECK(bogus.code == 1);
  CHECK(bogus.err.find("Usage") != std::string::npos);

  const auto bad_steps = sb.run("experiment --name table-d --steps -5");
  CHECK(bad_steps.code == 1);

  const auto help = sb.run("--help");
  CHECK(help.code == 0);
  CHECK(help.out.find("experiment") != std::string::npos);
}

TEST_CASE("cli: configuration errors name the offending path") {
  Sandbox sb;
  const auto missing = sb.run("train --config nowhere.json");
  CHECK(missing.code == 1);
  CHECK(missing.error_json().at("error") == "config");
  CHECK(missing.error_json().at("message").get<std::string>().find("nowhere.json") != std::string::npos);

  sb.write("noschema.json", R"({"hidden_width": 4})");
  const auto noschema = sb.run("train --config noschema.json");
  CHECK(noschema.code == 1);
  CHECK(noschema.error_json().at("message").get<std::string>().find("schema") != std::string::npos);

  sb.write("wrong.json", R"({"schema": "floquet-lab/sweep/v1"})");
  CHECK(sb.run("train --config wrong.json").code == 1);

  const auto no_model = sb.run("experiment --name illustration-a");
  CHECK(no_model.code == 1);
  CHECK(no_model.error_json().at("error") == "config");
  CHECK_FALSE(fs::exists(sb.dir() / "out" / "illustration-a" / "attenuation.csv"));

  CHECK(sb.run("floquet --weights absent.json").code == 1);
}

TEST_CASE("cli: numerical failure exits 2") {
  Sandbox sb;
  sb.write("diverge.json",
           R"({"schema": "floquet-lab/train/v1", "hidden_width": 4, "n_samples": 64,
               "optimizer": {"learning_rate": 1e200, "epochs": 50}})");
  const auto r = sb.run("train --config diverge.json");
  CHECK(r.code == 2);
  CHECK(r.error_json().at("error") == "divergence");
}

TEST_CASE("cli: table-d experiment writes the LAJ table and manifest") {
  Sandbox sb;
  const auto r = sb.run("experiment --name table-d --quiet");
  REQUIRE(r.code == 0);
  CHECK(r.out.empty());
  const std::string csv = slurp(sb.dir() / "out" / "table-d" / "laj.csv");
  CHECK(csv.rfind("quantity,numerical,exact\n", 0) == 0);
  CHECK(csv.find("bound_d_c_t,30.3379024,") != std::string::npos);
  const json manifest = json::parse(slurp(sb.dir() / "out" / "table-d" / "manifest.json"));
  CHECK(manifest.at("experiment") == "table-d");

  const auto t = sb.run("table --name d --output-dir t2");
  CHECK(t.code == 0);
  CHECK(t.out == csv);
}

TEST_CASE("cli: floquet, analyze and sweep on a weight file") {
  Sandbox sb;
  write_small_net(sb.dir() / "net.json");
  const std::string before = slurp(sb.dir() / "net.json");

  const auto fl = sb.run("floquet --weights net.json --orbit unit-circle --steps 800");
  REQUIRE(fl.code == 0);
  const json fj = json::parse(fl.out);
  CHECK(fj.at("bounds").at("det_ok") == true);
  CHECK(fj.at("bounds").at("exponents_ok") == true);

  const auto sl = sb.run("floquet --field stuart-landau --orbit trajectory --x0 1,0 --steps 4000");
  REQUIRE(sl.code == 0);
  const json sj = json::parse(sl.out);
  CHECK(sj.at("bounds").at("det_bound_d").get<double>() == doctest::Approx(30.3379024).epsilon(1e-6));
  CHECK(sj.at("bounds").at("det_ok") == true);

  const auto an = sb.run("analyze --weights net.json --s 3 --points 200");
  CHECK(an.code == 0);
  CHECK(json::parse(an.out).at("scale_s") == 3.0);

  const auto sw = sb.run("sweep --weights net.json --s-values 1,2 --steps 400");
  CHECK(sw.code == 0);
  CHECK(sw.out.rfind("s,delta,c_of_u", 0) == 0);

  const auto q = sb.run("analyze --weights net.json --quiet");
  CHECK(q.code == 0);
  CHECK(q.out.empty());

  CHECK(slurp(sb.dir() / "net.json") == before);
}

TEST_CASE("cli: train writes a loadable model honouring the config") {
  Sandbox sb;
  sb.write("t.json", R"({"schema": "floquet-lab/train/v1", "hidden_width": 5, "n_samples": 128,
                        "optimizer": {"epochs": 20}})");
  const auto r = sb.run("train --config t.json --output-dir m --seed 3");
  REQUIRE(r.code == 0);
  const Mlp m = read_weights(sb.dir() / "m" / "model.json");
  CHECK(m.layer(0).weight.rows() == 5);
  const json rep = json::parse(slurp(sb.dir() / "m" / "train_report.json"));
  CHECK(rep.at("config").at("seed") == 3);
  // Initial loss plus one entry per epoch.
  CHECK(rep.at("loss_history").size() == 21);
}
