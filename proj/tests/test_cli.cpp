#include <gtest/gtest.h>

#include <sys/wait.h>

#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code;
  std::string out;
};

fs::path scratch() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("fvfrac_cli_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

CliResult run(const std::string& args) {
  const fs::path out = scratch() / "stdout.txt";
  const std::string cmd = std::string(FVFRAC_CLI_PATH) + " " + args + " > " + out.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  std::ifstream is(out);
  std::stringstream ss;
  ss << is.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Cli, MeshInfoSpecs) {
  const CliResult r = run("mesh-info rect:2,2");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("vertices   9"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("interior   1"), std::string::npos) << r.out;
  EXPECT_EQ(run("mesh-info disk:0.5").code, 0);
  EXPECT_EQ(run("mesh-info example2-riesz-disk:0.3").code, 0);
  EXPECT_EQ(run("mesh-info rect:2").code, 3);
  EXPECT_EQ(run("mesh-info disk:abc").code, 3);
}

TEST(Cli, MeshInfoFile) {
  const fs::path good = scratch() / "good.mesh";
  std::ofstream(good) << "# square\nnodes 4\n0 0\n1 0\n1 1\n0 1\ntriangles 2\n0 1 2\n0 2 3\n";
  const CliResult r = run("mesh-info " + good.string());
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("triangles  2"), std::string::npos);

  const fs::path bad = scratch() / "bad.mesh";
  std::ofstream(bad) << "nodes 3\n0 0\n1 0\n0 oops\n";
  const CliResult b = run("mesh-info " + bad.string());
  EXPECT_EQ(b.code, 3);
  EXPECT_NE(b.out.find("line 4"), std::string::npos) << b.out;

  const fs::path dangling = scratch() / "dangling.mesh";
  std::ofstream(dangling) << "nodes 3\n0 0\n1 0\n0 1\ntriangles 1\n0 1 9\n";
  EXPECT_EQ(run("mesh-info " + dangling.string()).code, 3);
  EXPECT_EQ(run("mesh-info " + (scratch() / "missing.mesh").string()).code, 3);
}

TEST(Cli, ArgumentErrors) {
  EXPECT_EQ(run("").code, 3);
  EXPECT_EQ(run("solve").code, 3);
  EXPECT_EQ(run("solve --preset nope").code, 3);
  EXPECT_EQ(run("solve --preset example1-linear --alpha 1.5 --tau 0.1 --t-final 0.1").code, 3);
  EXPECT_EQ(run("solve --preset example1-linear --solver lu --tau 0.1 --t-final 0.1").code, 3);
  EXPECT_EQ(run("convergence --preset example1-linear --h-levels 0.3,x").code, 3);
  EXPECT_EQ(run("--help").code, 0);
}

TEST(Cli, SolveWritesOutputs) {
  const fs::path vtk = scratch() / "u.vtk", csv = scratch() / "u.csv";
  const CliResult r = run("solve --preset example1-linear --h 0.3 --tau 0.05 --t-final 0.1 --vtk " + vtk.string() +
                    " --csv " + csv.string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("linf_error"), std::string::npos);
  EXPECT_EQ(slurp(vtk).rfind("# vtk DataFile Version 3.0", 0), 0u);
  EXPECT_EQ(slurp(csv).rfind("h,l2_error,order_l2,linf_error,order_linf,iters_avg,wall_seconds\n", 0), 0u);
  EXPECT_EQ(run("solve --preset example1-linear --h 0.3 --tau 0.05 --t-final 0.1 --solver dense").code, 0);
}

TEST(Cli, NonConvergence) {
  const CliResult r = run("solve --preset example2-riesz-disk --h 0.3 --tau 0.05 --t-final 0.1 --maxit 1");
  EXPECT_EQ(r.code, 2) << r.out;
}

TEST(Cli, ConvergenceAndDensity) {
  const fs::path csv = scratch() / "conv.csv";
  const CliResult r = run("convergence --preset example1-linear --h-levels 0.3,0.15 --tau 0.05 --t-final 0.1 --csv " +
                    csv.string());
  ASSERT_EQ(r.code, 0) << r.out;
  const std::string text = slurp(csv);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);

  const fs::path dcsv = scratch() / "dens.csv";
  const CliResult d = run("density --preset example1-linear --h-levels 0.6,0.3,0.15 --csv " + dcsv.string());
  ASSERT_EQ(d.code, 0) << d.out;
  EXPECT_EQ(slurp(dcsv).rfind("h,unknowns,nnz,density_percent\n", 0), 0u);
}
