#include "doctest.h"

#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "fixtures.hpp"
#include "vpreg/cli.hpp"
#include "vpreg/io.hpp"
#include "vpreg/phantom.hpp"
#include "vpreg/resample.hpp"

using namespace vpreg;
using fixture::TempDir;
using nlohmann::json;

namespace {

int run(std::vector<std::string> args) {
  args.insert(args.begin(), {"vpreg", "-q"});
  return run_cli(args);
}

std::vector<std::string> csv_header(const std::string& path) {
  std::istringstream in(fixture::slurp(path));
  std::string line, cell;
  std::getline(in, line);
  std::vector<std::string> out;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

std::vector<std::string> csv_row(const std::string& path, int row) {
  std::istringstream in(fixture::slurp(path));
  std::string line;
  for (int r = 0; r <= row; ++r) std::getline(in, line);
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string cell(const std::string& path, const std::string& column) {
  const auto h = csv_header(path);
  const auto r = csv_row(path, 1);
  for (std::size_t k = 0; k < h.size(); ++k)
    if (h[k] == column) return r.at(k);
  FAIL("no column " << column);
  return {};
}

// `count` labels in 2-voxel blocks inside a centred ball
LabelVolume shells(const Domain& d, int count) {
  std::vector<std::int32_t> l(d.size(), 0);
  const double c = 0.5 * (d.extent(0) - 1);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto p = d.coords(i);
    double r2 = 0;
    for (int a = 0; a < d.dim(); ++a) r2 += (p[a] - c) * (p[a] - c);
    const double r = std::sqrt(r2);
    if (r < 0.4 * d.extent(0)) l[i] = 1 + (p[0] / 2 + 3 * (p[1] / 2) + 7 * (p[2] / 2)) % count;
  }
  return LabelVolume(d, std::move(l));
}

fixture::NiftiSpec nifti_of(const ScalarField& s, int datatype) {
  fixture::NiftiSpec nii;
  for (int a = 0; a < s.domain().dim(); ++a) nii.dims.push_back(s.domain().extent(a));
  nii.datatype = datatype;
  nii.values.assign(s.values().begin(), s.values().end());
  return nii;
}

fixture::NiftiSpec nifti_of(const LabelVolume& l) {
  fixture::NiftiSpec nii;
  for (int a = 0; a < l.domain().dim(); ++a) nii.dims.push_back(l.domain().extent(a));
  nii.datatype = 4;
  for (auto v : l.labels()) nii.values.push_back(v);
  return nii;
}

}  // namespace

TEST_CASE("register") {
  TempDir dir("cli_reg");
  const Domain d{32, 32};
  write_volume(phantom::ball(d, 9), dir / "m");
  write_volume(phantom::ellipsoid(d, 11, 8, 1), dir / "f");

  SUBCASE("identical images give the identity") {
    CHECK(run({"register", "--moving", dir / "m", "--fixed", dir / "m", "--out", dir / "same"}) == kExitOk);
    const Transform phi = read_transform(dir / "same/phi");
    CHECK(map_deviation(phi, make_identity(d)).max < 1e-6);
    for (const char* f : {"phi_inv.vpv.json", "warped_moving.vpv.raw", "warped_fixed.vpv.json", "metrics.csv",
                          "metrics.json", "trace.csv"})
      CHECK(std::filesystem::exists(dir / ("same/" + std::string(f))));
  }
  SUBCASE("both engines") {
    for (const char* engine : {"penalty", "control"}) {
      const std::string out = dir / engine;
      CHECK(run({"register", "--moving", dir / "m", "--fixed", dir / "f", "--out", out, "--engine", engine,
                 "--dtype", "f64"}) == kExitOk);
      CHECK(std::stod(cell(out + "/metrics.csv", "mse_ratio")) < 0.5);
      CHECK(csv_header(out + "/trace.csv").size() == 7);
    }
  }
  SUBCASE("lattice mismatch") {
    write_volume(ScalarField(Domain{32, 30}), dir / "other");
    CHECK(run({"register", "--moving", dir / "m", "--fixed", dir / "other", "--out", dir / "x"}) == kExitInvalid);
  }
  SUBCASE("bad arguments") {
    CHECK(run({"register", "--moving", dir / "m", "--out", dir / "x"}) == kExitInvalid);
    CHECK(run({"register", "--moving", dir / "m", "--fixed", dir / "f", "--out", dir / "x", "--engine", "magic"}) ==
          kExitInvalid);
    CHECK(run({"register", "--moving", dir / "m", "--fixed", dir / "f", "--out", dir / "x", "--tau0", "0"}) ==
          kExitInvalid);
    CHECK(run({"register", "--moving", dir / "missing", "--fixed", dir / "f", "--out", dir / "x"}) == kExitInvalid);
    CHECK(run({"frobnicate"}) == kExitInvalid);
  }
  SUBCASE("config file") {
    write_text(dir / "reg.toml", "[register]\nengine = \"control\"\nstage2-iters = 3\n");
    CHECK(run({"register", "--config", dir / "reg.toml", "--moving", dir / "m", "--fixed", dir / "f", "--out",
               dir / "cfg"}) == kExitOk);
    std::istringstream trace(fixture::slurp(dir / "cfg/trace.csv"));
    std::string line;
    int stage2 = 0;
    while (std::getline(trace, line)) stage2 += line.rfind("2,", 0) == 0;
    CHECK(stage2 == 4);
    CHECK(run({"register", "--moving", dir / "m", "--fixed", dir / "f", "--out", dir / "cfg2", "--stage2-iters", "1",
               "--config=" + (dir / "reg.toml")}) == kExitOk);
    std::istringstream trace2(fixture::slurp(dir / "cfg2/trace.csv"));
    stage2 = 0;
    while (std::getline(trace2, line)) stage2 += line.rfind("2,", 0) == 0;
    CHECK(stage2 == 2);
    write_text(dir / "bad.toml", "[register]\nengine = \"warp-drive\"\n");
    CHECK(run({"register", "--config", dir / "bad.toml", "--moving", dir / "m", "--fixed", dir / "f", "--out",
               dir / "cfg3"}) == kExitInvalid);
  }
}

TEST_CASE("invert") {
  TempDir dir("cli_inv");
  const Domain d{32, 32};
  SUBCASE("identity") {
    write_volume(make_identity(d), dir / "id");
    CHECK(run({"invert", "--map", dir / "id", "--out", dir / "o"}) == kExitOk);
    CHECK(map_deviation(read_transform(dir / "o/phi_inv"), make_identity(d)).max < 1e-6);
    const json j = json::parse(fixture::slurp(dir / "o/inverse_report.json"));
    for (const char* side : {"inv_after_fwd", "fwd_after_inv"})
      for (const char* k : {"max_det", "sum_det", "sum_det_per_voxel", "max_norm", "sum_norm", "sum_norm_per_voxel"})
        CHECK(j[side].contains(k));
    CHECK(cell(dir / "o/inverse_report.csv", "inv_sumnorm_per_voxel") == "0");
  }
  SUBCASE("smooth map") {
    write_volume(phantom::smooth_map(d, 1.5, 2), dir / "phi", Dtype::F64);
    CHECK(run({"invert", "--map", dir / "phi", "--out", dir / "o"}) == kExitOk);
    const json j = json::parse(fixture::slurp(dir / "o/inverse_report.json"));
    CHECK(j["inv_after_fwd"]["sum_norm_per_voxel"].get<double>() < 1e-2);
  }
  SUBCASE("folded input") {
    VectorField c = identity_coords(d);
    c[0][d.index(10, 10)] = 13.0;
    write_volume(Transform(c), dir / "fold");
    CHECK(run({"invert", "--map", dir / "fold", "--out", dir / "o"}) == kExitInvalid);
  }
  SUBCASE("iteration budget too small") {
    write_volume(phantom::smooth_map(d, 2.0, 2), dir / "phi");
    CHECK(run({"invert", "--map", dir / "phi", "--out", dir / "o", "--max-iters", "1", "--tolerance", "1e-9",
               "--accept-tolerance", "1e-9"}) == kExitNumerical);
  }
}

TEST_CASE("gridgen") {
  TempDir dir("cli_gg");
  SUBCASE("uniform") {
    CHECK(run({"gridgen", "--preset", "uniform", "--dims", "16,16", "--out", dir / "u"}) == kExitOk);
    CHECK(map_deviation(read_transform(dir / "u/phi"), make_identity(Domain{16, 16})).max < 1e-6);
  }
  SUBCASE("radial bump") {
    CHECK(run({"gridgen", "--preset", "radial-bump", "--dims", "32,32", "--amp", "0.5", "--width", "5", "--out",
               dir / "b"}) == kExitOk);
    const json j = json::parse(fixture::slurp(dir / "b/gridgen_report.json"));
    CHECK(j["jd_rel_l2"].get<double>() < 0.05);
    CHECK(j["diffeomorphic"] == true);
  }
  SUBCASE("target files and mass") {
    const Domain d{16, 16};
    write_volume(ScalarField(d, 1.2), dir / "heavy");
    CHECK(run({"gridgen", "--f-target", dir / "heavy", "--out", dir / "h"}) == kExitInvalid);
    CHECK(run({"gridgen", "--f-target", dir / "heavy", "--renormalize", "--out", dir / "h"}) == kExitOk);
    CHECK(run({"gridgen", "--out", dir / "none"}) == kExitInvalid);
    CHECK(run({"gridgen", "--preset", "uniform", "--dims", "4,4", "--out", dir / "tiny"}) == kExitInvalid);
  }
}

TEST_CASE("metrics") {
  TempDir dir("cli_met");
  const Domain d{16, 16};
  const ScalarField m = phantom::ball(d, 5), f = phantom::ellipsoid(d, 6, 4, 1);
  const Transform phi = phantom::smooth_map(d, 1.0, 5);
  write_volume(m, dir / "m", Dtype::F64);
  write_volume(f, dir / "f", Dtype::F64);
  write_volume(phi, dir / "phi", Dtype::F64);
  write_volume(phantom::threshold(m), dir / "lm");
  write_volume(phantom::threshold(f), dir / "lf");

  SUBCASE("without an inverse the inverse columns stay empty") {
    CHECK(run({"metrics", "--phi", dir / "phi", "--out", dir / "o"}) == kExitOk);
    CHECK(cell(dir / "o/metrics.csv", "inv_maxdet").empty());
    CHECK(cell(dir / "o/metrics.csv", "mse_ratio").empty());
    CHECK(!cell(dir / "o/metrics.csv", "jd_min").empty());
  }
  SUBCASE("matches the library") {
    CHECK(run({"metrics", "--phi", dir / "phi", "--phi-inv", dir / "phi", "--moving", dir / "m", "--fixed",
               dir / "f", "--labels-moving", dir / "lm", "--labels-fixed", dir / "lf", "--out", dir / "o"}) == kExitOk);
    const LabelVolume lm = phantom::threshold(m), lf = phantom::threshold(f);
    MetricInputs in;
    in.phi = &phi;
    in.phi_inv = &phi;
    in.moving = &m;
    in.fixed = &f;
    in.labels_moving = &lm;
    in.labels_fixed = &lf;
    CHECK(fixture::slurp(dir / "o/metrics.csv") == records_csv({compute_metrics(in)}));
  }
  SUBCASE("unpaired inputs") {
    CHECK(run({"metrics", "--phi", dir / "phi", "--moving", dir / "m", "--out", dir / "o"}) == kExitInvalid);
    CHECK(run({"metrics", "--phi", dir / "m", "--out", dir / "o"}) == kExitInvalid);
  }
}

TEST_CASE("cohort") {
  TempDir dir("cli_coh");
  const Domain d{24, 24};
  std::ostringstream manifest;
  manifest << "moving,fixed\n";
  for (int k = 0; k < 4; ++k) {
    write_volume(phantom::ball(d, 6 + k), dir / ("m" + std::to_string(k)));
    write_volume(phantom::ellipsoid(d, 8, 5 + 0.5 * k, 1), dir / ("f" + std::to_string(k)));
    manifest << "m" << k << ",f" << k << "\n";
  }
  write_text(dir / "pairs.csv", manifest.str());
  CHECK(run({"cohort", "--manifest", dir / "pairs.csv", "--threads", "2", "--out", dir / "t2"}) == kExitOk);
  CHECK(run({"cohort", "--manifest", dir / "pairs.csv", "--threads", "4", "--out", dir / "t4"}) == kExitOk);
  CHECK(fixture::slurp(dir / "t2/metrics.csv") == fixture::slurp(dir / "t4/metrics.csv"));
  CHECK(fixture::slurp(dir / "t2/summary.csv") == fixture::slurp(dir / "t4/summary.csv"));
  CHECK(csv_header(dir / "t2/metrics.csv").front() == "id");
  CHECK(std::filesystem::exists(dir / "t2/pairs/pair_003.json"));

  write_text(dir / "empty.csv", "moving,fixed\n");
  CHECK(run({"cohort", "--manifest", dir / "empty.csv", "--out", dir / "e"}) == kExitInvalid);
}

TEST_CASE("demo-consistency is deterministic") {
  TempDir dir("cli_demo");
  CHECK(run({"demo-consistency", "--size", "32", "--amp", "1.5", "--out", dir / "a"}) == kExitOk);
  CHECK(run({"demo-consistency", "--size", "32", "--amp", "1.5", "--threads", "3", "--out", dir / "b"}) == kExitOk);
  CHECK(fixture::slurp(dir / "a/consistency_report.json") == fixture::slurp(dir / "b/consistency_report.json"));
  CHECK(fixture::slurp(dir / "a/cb_of_ac_vs_ab.svg") == fixture::slurp(dir / "b/cb_of_ac_vs_ab.svg"));
  const json j = json::parse(fixture::slurp(dir / "a/consistency_report.json"));
  CHECK(j["ba_after_ab"]["mean"].get<double>() < 0.5);
  CHECK(j["transitivity"]["mean"].get<double>() < 1.0);
}

TEST_CASE("segmented NIfTI volumes produce complete reports") {
  TempDir dir("cli_nii");
  const Domain d{24, 24, 24};
  const ScalarField m = phantom::ball(d, 8), f = phantom::ellipsoid(d, 9, 8, 7.5);
  fixture::write_nifti(dir / "m.nii.gz", nifti_of(m, 16));
  fixture::write_nifti(dir / "f.nii", nifti_of(f, 64));
  for (int count : {4, 35}) {
    CAPTURE(count);
    const std::string tag = std::to_string(count);
    fixture::write_nifti(dir / ("lm" + tag + ".nii.gz"), nifti_of(shells(d, count)));
    fixture::write_nifti(dir / ("lf" + tag + ".nii"), nifti_of(shells(d, count)));
    const std::string reg = dir / ("reg" + tag), met = dir / ("met" + tag);
    CHECK(run({"register", "--moving", dir / "m.nii.gz", "--fixed", dir / "f.nii", "--labels-moving",
               dir / ("lm" + tag + ".nii.gz"), "--labels-fixed", dir / ("lf" + tag + ".nii"), "--out", reg}) ==
          kExitOk);
    CHECK(run({"metrics", "--phi", reg + "/phi", "--phi-inv", reg + "/phi_inv", "--moving", dir / "m.nii.gz",
               "--fixed", dir / "f.nii", "--labels-moving", dir / ("lm" + tag + ".nii.gz"), "--labels-fixed",
               dir / ("lf" + tag + ".nii"), "--out", met}) == kExitOk);
    for (const std::string& csv : {reg + "/metrics.csv", met + "/metrics.csv"}) {
      const auto h = csv_header(csv);
      const auto r = csv_row(csv, 1);
      CHECK(h.size() == 18 + std::size_t(count));
      CHECK(r.size() == h.size());
      for (std::size_t k = 0; k < r.size(); ++k) {
        CAPTURE(h[k]);
        CHECK(!r[k].empty());
      }
      CHECK(h.back() == "dice_" + tag);
    }
  }
}
