#include <doctest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "expmon/events.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string output;  // stdout and stderr
};

Run run(const std::string& args) {
  const std::string cmd = std::string(EXPMON_CLI_PATH) + " " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe)) r.output += buf.data();
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

// Data files are written once for every case in this file.
const fs::path& data_dir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "expmon-cli-data";
    fs::remove_all(d);
    auto r = run("simulate --no-grid --write-data " + d.string());
    REQUIRE(r.code == 0);
    return d;
  }();
  return dir;
}

std::string path(const std::string& name) { return (data_dir() / name).string(); }

}  // namespace

TEST_CASE("cli: replay a campaign stream") {
  const auto events = path("events.jsonl");
  fs::remove(events);
  auto r = run("replay -s " + path("stream_campaign.jsonl") + " -p " + path("profile.json") + " -r " +
               path("registry.json") + " -e " + events);
  REQUIRE(r.code == 0);
  auto summary = nlohmann::json::parse(r.output);
  CHECK(summary.at("observations").get<int>() > 0);
  CHECK(summary.at("events").at("decision").get<int>() > 0);
  auto records = expmon::read_event_log(events);
  CHECK_FALSE(records.empty());

  auto again = run("replay -s " + path("stream_campaign.jsonl") + " -p " + path("profile.json") + " -e " + events);
  CHECK(again.code == 2);
  CHECK(again.output.find("--force") != std::string::npos);
  auto forced = run("replay -f -s " + path("stream_campaign.jsonl") + " -p " + path("profile.json") + " -r " +
                    path("registry.json") + " -e " + events);
  CHECK(forced.code == 0);
  CHECK(expmon::read_event_log(events).size() == records.size());
}

TEST_CASE("cli: malformed stream line is named") {
  std::ifstream in(path("stream_null.jsonl"));
  std::ofstream out(path("broken.jsonl"));
  std::string line;
  for (int i = 1; i <= 10 && std::getline(in, line); ++i) out << (i == 7 ? line.substr(0, line.size() / 2) : line) << '\n';
  out.close();
  auto r = run("replay -s " + path("broken.jsonl") + " -p " + path("profile.json"));
  CHECK(r.code == 3);
  CHECK(r.output.find("line 7") != std::string::npos);
}

TEST_CASE("cli: missing files and bad configuration") {
  auto missing = run("replay -s " + path("nope.jsonl") + " -p " + path("profile.json"));
  CHECK(missing.code == 4);
  auto no_profile = run("replay -s " + path("stream_null.jsonl") + " -p " + path("nope.json"));
  CHECK(no_profile.code == 4);

  std::ofstream(path("bad_config.json")) << R"({"window": 0})";
  auto bad = run("replay -c " + path("bad_config.json") + " -s " + path("stream_null.jsonl") + " -p " +
                 path("profile.json"));
  CHECK(bad.code == 2);
  CHECK(bad.output.find("window") != std::string::npos);

  CHECK(run("replay").code == 2);
  CHECK(run("frobnicate").code == 2);
  CHECK(run("simulate --trials 10 --errors 0 --uncertainties 1").code == 2);
}

TEST_CASE("cli: validate-registry and fit-profile") {
  auto ok = run("validate-registry -r " + path("registry.json") + " -p " + path("profile.json"));
  CHECK(ok.code == 0);

  auto registry = nlohmann::json::parse(std::ifstream(path("registry.json")));
  registry["scenarios"][0]["estimates"][0]["feature"] = "zipcode";
  std::ofstream(path("bad_registry.json")) << registry.dump();
  auto bad = run("validate-registry -r " + path("bad_registry.json") + " -p " + path("profile.json"));
  CHECK(bad.code == 3);
  CHECK(bad.output.find("zipcode") != std::string::npos);

  auto fit = run("fit-profile -i " + path("training.jsonl") + " --count recent_page_visits -o " + path("refit.json"));
  CHECK(fit.code == 0);
  auto refit = nlohmann::json::parse(std::ifstream(path("refit.json")));
  auto original = nlohmann::json::parse(std::ifstream(path("profile.json")));
  CHECK(refit.at("features").size() == original.at("features").size());
}

TEST_CASE("cli: small grid writes CSV and manifest") {
  auto r = run("simulate --errors 0 --uncertainties 1 --trials 50 --csv " + path("grid.csv") + " --manifest " +
               path("manifest.json"));
  REQUIRE(r.code == 0);
  std::ifstream csv(path("grid.csv"));
  std::string header;
  std::getline(csv, header);
  CHECK(header == "error_level,uncertainty_level,trials,successes,accuracy");
  auto manifest = nlohmann::json::parse(std::ifstream(path("manifest.json")));
  CHECK(manifest.contains("config_hash"));
}
