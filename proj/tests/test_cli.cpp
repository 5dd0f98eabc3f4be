#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "qreg/dataset.hpp"

using namespace qreg;

namespace {

const std::string kCli = QREG_CLI_PATH;

std::string tmp_path(const std::string& name) {
  return std::string("/tmp/qreg_cli_test_") + name;
}

int run(const std::string& args) {
  const std::string cmd = kCli + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

}  // namespace

TEST_CASE("fit: median of an intercept-only model") {
  const std::string in = tmp_path("median.csv");
  write_file(in, "y\n1\n2\n3\n4\n5\n");
  const std::string out = tmp_path("median_out.csv");
  REQUIRE(run("fit --input " + in + " --response y --taus 0.5 --method iid "
              "--no-ols --output " + out) == 0);
  Dataset report = load_dataset(out, {{"tau", ColumnType::categorical},
                                      {"coefficient_name", ColumnType::categorical},
                                      {"estimate", ColumnType::continuous}});
  CHECK(report.n_rows() == 1);
  CHECK(report.column("estimate").values[0] == doctest::Approx(3.0));
}

TEST_CASE("fit: full grid report has 19K quantile rows plus K OLS rows") {
  const std::string in = tmp_path("panel.csv");
  std::ostringstream csv;
  csv << "y,x,g\n";
  for (int i = 0; i < 200; ++i) {
    csv << (i % 7) + 0.25 * i << "," << i % 5 << ",g" << i % 3 << "\n";
  }
  write_file(in, csv.str());
  const std::string out = tmp_path("panel_out.csv");
  REQUIRE(run("fit --input " + in +
              " --response y --terms x --fe g --taus 0.05:0.95:0.05 "
              "--method sandwich --output " + out) == 0);
  Dataset report = load_dataset(out, {{"tau", ColumnType::categorical},
                                      {"method", ColumnType::categorical}});
  const int k = 1 + 1 + 2;  // intercept + x + two g dummies
  CHECK(report.n_rows() == 19 * k + k);
  int ols_rows = 0;
  for (std::size_t i = 0; i < report.n_rows(); ++i) {
    if (report.column("tau").labels[i] == "mean") {
      ++ols_rows;
      CHECK(report.column("method").labels[i] == "ols");
    }
  }
  CHECK(ols_rows == k);
}

TEST_CASE("fit: missing response column exits 3 and names the column") {
  const std::string in = tmp_path("missing.csv");
  write_file(in, "y\n1\n2\n");
  CHECK(run("fit --input " + in + " --response height --taus 0.5") == 3);
}

TEST_CASE("usage errors exit 2") {
  CHECK(run("fit") == 2);
  CHECK(run("nonsense") == 2);
  const std::string in = tmp_path("u.csv");
  write_file(in, "y\n1\n2\n");
  CHECK(run("fit --input " + in + " --response y --taus 1.5") == 2);
  CHECK(run("fit --input " + in + " --response y --taus 0.5 "
            "--method bootstrap --B 10") == 2);
}

TEST_CASE("lqte output equals qte output when d = z") {
  const std::string in = tmp_path("dz.csv");
  std::ostringstream csv;
  csv << "y,d\n";
  for (int i = 0; i < 80; ++i) {
    csv << 0.1 * i + (i % 2) << "," << i % 2 << "\n";
  }
  write_file(in, csv.str());
  const std::string out_qte = tmp_path("qte.csv");
  const std::string out_lqte = tmp_path("lqte.csv");
  REQUIRE(run("qte --input " + in +
              " --outcome y --treatment d --taus 0.1:0.9:0.1 --no-band "
              "--output " + out_qte) == 0);
  REQUIRE(run("lqte --input " + in +
              " --outcome y --treatment d --instrument d --taus 0.1:0.9:0.1 "
              "--no-band --output " + out_lqte) == 0);
  Dataset a = load_dataset(out_qte, {{"tau", ColumnType::continuous},
                                     {"effect", ColumnType::continuous},
                                     {"q1", ColumnType::continuous},
                                     {"q0", ColumnType::continuous}});
  Dataset b = load_dataset(out_lqte, {{"tau", ColumnType::continuous},
                                      {"effect", ColumnType::continuous},
                                      {"q1", ColumnType::continuous},
                                      {"q0", ColumnType::continuous}});
  CHECK(a.column("effect").values == b.column("effect").values);
  CHECK(a.column("q1").values == b.column("q1").values);
}

TEST_CASE("qte effect column is constant under a shifted control sample") {
  const std::string in = tmp_path("shift.csv");
  std::ostringstream csv;
  csv << "y,d\n";
  for (int i = 0; i < 40; ++i) csv << 0.3 * i << ",0\n";
  for (int i = 0; i < 40; ++i) csv << 0.3 * i + 1.5 << ",1\n";
  write_file(in, csv.str());
  const std::string out = tmp_path("shift_out.csv");
  REQUIRE(run("qte --input " + in +
              " --outcome y --treatment d --taus 0.2,0.5,0.8 --no-band "
              "--output " + out) == 0);
  Dataset report = load_dataset(out, {{"effect", ColumnType::continuous}});
  for (double e : report.column("effect").values) {
    CHECK(e == doctest::Approx(1.5).epsilon(1e-12));
  }
}

TEST_CASE("simulate: schema, coverage range, and byte-identical reruns") {
  const std::string out1 = tmp_path("sim1.csv");
  const std::string out2 = tmp_path("sim2.csv");
  const std::string flags =
      "simulate --n 300 --reps 60 --seed 11 --taus 0.5 --threads 2 --output ";
  REQUIRE(run(flags + out1) == 0);
  REQUIRE(run(flags + out2) == 0);
  CHECK(slurp(out1) == slurp(out2));
  Dataset report = load_dataset(out1, {{"tau", ColumnType::continuous},
                                       {"bias", ColumnType::continuous},
                                       {"rmse", ColumnType::continuous},
                                       {"coverage", ColumnType::continuous}});
  CHECK(report.n_rows() == 1);
  CHECK(report.column("coverage").values[0] >= 0.0);
  CHECK(report.column("coverage").values[0] <= 1.0);
}

TEST_CASE("json output and csv output carry the same values") {
  const std::string in = tmp_path("fmt.csv");
  write_file(in, "y\n5\n6\n7\n");
  const std::string out = tmp_path("fmt_out.json");
  REQUIRE(run("fit --input " + in + " --response y --taus 0.5 --method iid "
              "--no-ols --format json --output " + out) == 0);
  const std::string text = slurp(out);
  CHECK(text.find("\"estimate\": 6") != std::string::npos);
  CHECK(text.find("\"tau\": 0.5") != std::string::npos);
}

TEST_CASE("config file values are applied and flags override them") {
  const std::string in = tmp_path("cfg.csv");
  write_file(in, "y\n1\n2\n3\n");
  const std::string cfg = tmp_path("run.cfg");
  write_file(cfg, "input=" + in + "\nresponse=y\ntaus=0.5\nmethod=iid\n"
                  "no-ols=true\n");
  const std::string out1 = tmp_path("cfg_out1.csv");
  REQUIRE(run("fit --config " + cfg + " --output " + out1) == 0);
  Dataset a = load_dataset(out1, {{"estimate", ColumnType::continuous}});
  CHECK(a.column("estimate").values[0] == doctest::Approx(2.0));

  const std::string out2 = tmp_path("cfg_out2.csv");
  REQUIRE(run("fit --config " + cfg + " --taus 0.8 --output " + out2) == 0);
  Dataset b = load_dataset(out2, {{"tau", ColumnType::continuous}});
  CHECK(b.column("tau").values[0] == doctest::Approx(0.8));
}

TEST_CASE("reports round-trip through load_dataset") {
  const std::string in = tmp_path("rt.csv");
  std::ostringstream csv;
  csv << "y,x\n";
  for (int i = 0; i < 50; ++i) csv << i * 0.7 + (i % 3) << "," << i % 4 << "\n";
  write_file(in, csv.str());
  const std::string out = tmp_path("rt_out.csv");
  REQUIRE(run("fit --input " + in +
              " --response y --terms x --taus 0.25,0.75 --method iid "
              "--output " + out) == 0);
  Dataset report =
      load_dataset(out, {{"tau", ColumnType::categorical},
                         {"coefficient_name", ColumnType::categorical},
                         {"estimate", ColumnType::continuous},
                         {"std_error", ColumnType::continuous},
                         {"ci_lower", ColumnType::continuous},
                         {"ci_upper", ColumnType::continuous},
                         {"method", ColumnType::categorical}});
  CHECK(report.n_rows() == 2 * 2 + 2);
  for (std::size_t i = 0; i < report.n_rows(); ++i) {
    CHECK(report.column("ci_lower").values[i] <=
          report.column("ci_upper").values[i]);
  }
}
