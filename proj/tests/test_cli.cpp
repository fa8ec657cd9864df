#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

using json = nlohmann::json;

namespace {

struct Proc {
  std::string out;
  int code = -1;
};

// Runs the CLI with stderr discarded; returns stdout and the exit status.
Proc run(const std::string& args) {
  const std::string cmd = std::string(FINSLER_CLI) + " " + args + " 2>/dev/null";
  Proc p;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return p;
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) p.out.append(buf.data(), n);
  const int status = pclose(pipe);
  p.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return p;
}

std::string data(const std::string& name) { return std::string(FINSLER_TEST_DATA) + "/" + name; }

std::vector<std::vector<double>> parse_csv(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

TEST(Cli, VerifyRejectsCompositePeriod) {
  EXPECT_EQ(run("verify --d 3 --r 4").code, 1);
}

TEST(Cli, VerifyPasses) {
  const Proc p = run("verify --d 4 --r 3");
  EXPECT_EQ(p.code, 0);
  EXPECT_TRUE(json::parse(p.out)["pass"].get<bool>());
}

TEST(Cli, BettiFormats) {
  const Proc j = run("betti --d 4 --r 3 --format json");
  ASSERT_EQ(j.code, 0);
  EXPECT_EQ(json::parse(j.out)["betti"], json::parse("[1,1,2,2,1,1]"));
  const Proc t = run("betti --d 4 --r 3 --format table");
  EXPECT_NE(t.out.find("degree"), std::string::npos);
  const Proc both = run("betti --d 4 --r 3");
  EXPECT_NE(both.out.find("\"betti\""), std::string::npos);
  EXPECT_NE(both.out.find("degree"), std::string::npos);
  EXPECT_EQ(run("betti --d 4 --r 3 --format xml").code, 1);
}

TEST(Cli, DiskSearchSkipsBound) {
  const Proc p = run("search --config " + data("disk_r3.json") + " --jobs 1");
  ASSERT_EQ(p.code, 0);
  const json report = json::parse(p.out);
  EXPECT_EQ(report["bound"]["check"], "skipped: non-generic");
  EXPECT_EQ(report["config"]["search"]["seeds"], 20);
}

TEST(Cli, ModeFromConfigAndOverrides) {
  const Proc p = run("--config " + data("disk_r3.json") + " --seed 7 --jobs 1");
  ASSERT_EQ(p.code, 0);
  EXPECT_EQ(json::parse(p.out)["config"]["search"]["rng_seed"], 7);
}

TEST(Cli, TraceIsDeterministic) {
  const Proc a = run("trace --config " + data("trace_euclidean.json"));
  const Proc b = run("trace --config " + data("trace_euclidean.json"));
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
}

TEST(Cli, TraceRowsLieOnTable) {
  const Proc p = run("trace --config " + data("trace_euclidean.json"));
  ASSERT_EQ(p.code, 0);
  EXPECT_EQ(p.out.substr(0, p.out.find('\n')), "t,x1,x2,v1,v2");
  const auto rows = parse_csv(p.out);
  ASSERT_EQ(rows.size(), 50u);
  for (const auto& row : rows) {
    ASSERT_EQ(row.size(), 5u);
    const double phi = row[1] * row[1] / 1.44 + row[2] * row[2] - 1.0;
    EXPECT_LE(std::abs(phi), 1e-10);
  }
}

TEST(Cli, MagneticTraceDeparts) {
  const auto flat = parse_csv(run("trace --config " + data("trace_euclidean.json")).out);
  const auto bent = parse_csv(run("trace --config " + data("trace_magnetic.json")).out);
  ASSERT_GE(flat.size(), 10u);
  ASSERT_GE(bent.size(), 10u);
  const double gap = std::hypot(flat[9][1] - bent[9][1], flat[9][2] - bent[9][2]);
  EXPECT_GT(gap, 1e-3);
}

TEST(Cli, TraceJsonFormat) {
  const Proc p = run("trace --config " + data("trace_magnetic.json") + " --format json");
  ASSERT_EQ(p.code, 0);
  const json doc = json::parse(p.out);
  EXPECT_EQ(doc["states"].size(), 50u);
  EXPECT_EQ(doc["config"]["metric"]["kind"], "magnetic");
}

TEST(Cli, ConfigErrorsExitOne) {
  EXPECT_EQ(run("--config " + data("bad_syntax.json")).code, 1);
  EXPECT_EQ(run("--config " + data("unknown_key.json")).code, 1);
  EXPECT_EQ(run("search").code, 1);
  EXPECT_EQ(run("search --config " + data("does_not_exist.json")).code, 1);
  EXPECT_EQ(run("--bogus-flag").code, 1);
}

TEST(Cli, SyntaxErrorNamesLine) {
  const std::string cmd =
      std::string(FINSLER_CLI) + " --config " + data("bad_syntax.json") + " 2>&1 >/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  ASSERT_NE(pipe, nullptr);
  std::string err;
  std::array<char, 1024> buf{};
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) err.append(buf.data(), n);
  pclose(pipe);
  EXPECT_NE(err.find("bad_syntax.json:4:"), std::string::npos) << err;
}
