// Acceptance gate: ten end-to-end criteria, one verdict line each. Exits
// with the number of failed criteria so the harness can gate on zero.
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <limits>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "gridtopo/confidence.hpp"
#include "gridtopo/detect.hpp"
#include "gridtopo/error.hpp"
#include "gridtopo/geo.hpp"
#include "gridtopo/kmeans.hpp"
#include "gridtopo/model.hpp"
#include "gridtopo/pipeline.hpp"
#include "gridtopo/reconnect.hpp"
#include "gridtopo/stats.hpp"
#include "gridtopo/synth.hpp"
#include "gridtopo/validate.hpp"

using namespace gridtopo;

namespace {

int failures = 0;

void verdict(int n, bool ok, const std::string& detail) {
  std::printf("%s criterion %d: %s\n", ok ? "PASS" : "FAIL", n, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

template <typename Fn>
void guarded(int n, Fn&& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    verdict(n, false, std::string("unexpected exception: ") + e.what());
  }
}

std::string fmt(const char* pattern, ...) {
  char buf[256];
  va_list args;
  va_start(args, pattern);
  std::vsnprintf(buf, sizeof(buf), pattern, args);
  va_end(args);
  return buf;
}

pipeline::PipelineInput input_from(const synth::SynthBundle& b) {
  pipeline::PipelineInput in;
  in.topology = b.corrupted;
  in.series = b.series;
  in.outages = b.outages;
  in.truth = b.truth.edges;
  return in;
}

// exhaustive 2-partition sum of squared distances, the k-means oracle
double best_two_partition(const std::vector<std::vector<double>>& pts) {
  const unsigned full = (1u << pts.size()) - 1u;
  double best = std::numeric_limits<double>::infinity();
  for (unsigned mask = 1; mask < full; ++mask) {
    double total = 0.0;
    for (unsigned g = 0; g < 2; ++g) {
      std::vector<double> c(pts[0].size(), 0.0);
      int m = 0;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        if (((mask >> i) & 1u) != g) continue;
        for (std::size_t d = 0; d < c.size(); ++d) c[d] += pts[i][d];
        ++m;
      }
      for (double& v : c) v /= m;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        if (((mask >> i) & 1u) != g) continue;
        for (std::size_t d = 0; d < c.size(); ++d) {
          double diff = pts[i][d] - c[d];
          total += diff * diff;
        }
      }
    }
    best = std::min(best, total);
  }
  return best;
}

void criterion_1() {
  double sum = 0.0;
  double slowest = 0.0;
  const int seeds = 5;
  for (int s = 1; s <= seeds; ++s) {
    synth::SynthConfig sc;  // 100 transformers, ~1400 premises, one week
    sc.seed = static_cast<std::uint64_t>(s);
    auto bundle = synth::generate(sc);
    pipeline::PipelineConfig cfg;
    cfg.parallelism = 4;
    auto t0 = std::chrono::steady_clock::now();
    pipeline::RunReport rep = pipeline::run_on(input_from(bundle), cfg);
    std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
    slowest = std::max(slowest, dt.count());
    if (!rep.accuracy) {
      verdict(1, false, fmt("seed %d produced no accuracy section", s));
      return;
    }
    sum += *rep.accuracy;
  }
  double mean_acc = sum / seeds;
  verdict(1, mean_acc >= 0.95 && slowest < 60.0,
          fmt("mean accuracy %.4f over %d seeds (need >= 0.95), slowest run %.1f s "
              "(need < 60)",
              mean_acc, seeds, slowest));
}

void criterion_2() {
  synth::SynthConfig sc;
  sc.seed = 7;
  sc.n_transformers = 40;
  sc.n_steps = 16;  // geometry is all that matters here
  auto bundle = synth::generate(sc);

  detect::GeoFlagOutcome out = detect::flag_geographic(bundle.corrupted, 3.0);
  std::set<std::string> flagged;
  for (const auto& f : out.flags) flagged.insert(f.premise_id);

  std::set<std::string> should_flag;  // corruptions whose true ratio beats 3
  for (const auto& rec : bundle.corruption_log) {
    const PremiseRecord* p = bundle.corrupted.premise(rec.premise_id);
    const TransformerRecord* rt = bundle.corrupted.transformer(rec.recorded_transformer);
    if (!p || !p->location || !rt) continue;
    double recorded = geodist_m(*p->location, rt->location);
    double nearest = detect::nearest_transformer(bundle.corrupted, *p).dist_m;
    double ratio = nearest > 0.0 ? recorded / nearest
                                 : (recorded > 0.0 ? std::numeric_limits<double>::infinity()
                                                   : 1.0);
    if (ratio > 3.0) should_flag.insert(rec.premise_id);
  }

  std::size_t tp = 0;
  for (const auto& id : should_flag)
    if (flagged.count(id)) ++tp;
  std::size_t fp = 0;
  for (const auto& id : flagged)
    if (!should_flag.count(id)) ++fp;

  double recall = should_flag.empty() ? 1.0 : double(tp) / double(should_flag.size());
  double precision = flagged.empty() ? 1.0 : double(tp) / double(tp + fp);
  verdict(2,
          recall >= 0.9 && precision >= 0.9 && !should_flag.empty(),
          fmt("tau=3 recall %.3f precision %.3f on %zu ratio>3 corruptions "
              "(need both >= 0.9)",
              recall, precision, should_flag.size()));
}

void criterion_3() {
  Topology t;
  t.transformers.push_back({"TA", {0.0, 0.000}, 10.0, {}});
  t.transformers.push_back({"TB", {0.0, 0.001}, 15.0, {}});
  t.transformers.push_back({"TC", {0.0, 0.002}, 10.0, {}});
  PremiseRecord pa, pb, pc;
  pa.id = "pa";
  pa.location = GeoPoint{0.0, 0.000};
  pb.id = "pb";
  pb.location = GeoPoint{0.0, 0.001};
  pc.id = "pc";
  pc.location = GeoPoint{0.0, 0.002};
  t.premises = {pa, pb, pc};
  t.edges = {{"pa", "TA"}, {"pb", "TB"}, {"pc", "TC"}};
  t.finalize();

  SeriesFrame f;
  f.timestamps = {0};
  f.premises["pa"].p_kw = {11.32};
  f.premises["pb"].p_kw = {13.0};
  f.premises["pc"].p_kw = {7.9};

  auto out = validate::check_capacity(t, f, ConstraintSet::for_nominal(240.0, 0.8));
  bool ok = out.table.size() == 3;
  ok = ok && out.table[0].limit_kw == 8.0 && out.table[0].violation;    // 11.32 > 8
  ok = ok && out.table[1].limit_kw == 12.0 && out.table[1].violation;   // 13.0 > 12
  ok = ok && out.table[2].limit_kw == 8.0 && !out.table[2].violation;   // 7.9 stays
  ok = ok && out.violations.size() == 2;
  verdict(3, ok,
          "capacity point checks: (10 kVA, pf 0.8) flags 11.32 kW at the exact 8 kW "
          "limit, (15 kVA) flags 13.0 kW at 12 kW, 7.9 kW passes");
}

void criterion_4() {
  double s1 = confidence::score_dbi(0.316, 0.955);
  double s2 = confidence::score_corr(0.991, 0.717);
  bool point = std::abs(s1 - 0.7514) <= 1e-3 && std::abs(s2 - 0.7993) <= 1e-3;
  bool sigma0 = confidence::score_corr(0.0, 0.9) == 0.5;  // zero ratio probes sigma(0)

  std::mt19937_64 gen(44);
  std::uniform_real_distribution<double> expo(-6.0, 6.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    double a = std::pow(10.0, expo(gen));
    double b = std::pow(10.0, expo(gen));
    worst = std::max(worst,
                     std::abs(confidence::score_dbi(a, b) + confidence::score_dbi(b, a) - 1.0));
  }
  bool antisym = worst <= 1e-12;

  bool monotone = true;
  for (int i = 0; i < 10 && monotone; ++i) {
    for (int j = 0; j < 10 && monotone; ++j) {
      double sd = 0.05 + 0.1 * i;
      double sc = 0.05 + 0.1 * j;
      if (i + 1 < 10 &&
          confidence::confidence_level(sd + 0.1, sc) <= confidence::confidence_level(sd, sc))
        monotone = false;
      if (j + 1 < 10 &&
          confidence::confidence_level(sd, sc + 0.1) <= confidence::confidence_level(sd, sc))
        monotone = false;
    }
  }

  verdict(4, point && sigma0 && antisym && monotone,
          fmt("score_dbi(0.316,0.955)=%.4f score_corr(0.991,0.717)=%.4f, sigma(0)=0.5, "
              "antisymmetry worst %.2e over 1000 pairs, level monotone on 100-pt grid",
              s1, s2, worst));
}

void criterion_5() {
  std::mt19937_64 gen(55);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> len(8, 64);

  bool pearson_ok = true;
  for (int i = 0; i < 1000 && pearson_ok; ++i) {
    int n = len(gen);
    std::vector<double> x(n), y(n);
    for (double& v : x) v = u(gen);
    for (double& v : y) v = u(gen);
    auto r = pearson(x, y);
    if (!r || r->rho < -1.0 || r->rho > 1.0) pearson_ok = false;
    auto rxx = pearson(x, x);
    if (!rxx || rxx->rho != 1.0) pearson_ok = false;
  }

  bool mi_ok = true;
  double worst_self = 0.0;
  for (int i = 0; i < 100 && mi_ok; ++i) {
    int n = len(gen);
    std::vector<double> x(n), y(n);
    for (double& v : x) v = u(gen);
    for (double& v : y) v = u(gen);
    double xy = reconnect::mutual_information(x, y, 16, 2);
    double yx = reconnect::mutual_information(y, x, 16, 2);
    if (xy != yx || xy < 0.0) mi_ok = false;  // symmetric to the bit
    double self = reconnect::mutual_information(x, x, 16, 2);
    worst_self = std::max(worst_self, std::abs(self - histogram_entropy(x, 16)));
    if (worst_self > 1e-12) mi_ok = false;
  }

  int low = 0;
  const int trials = 200;
  for (int i = 0; i < trials; ++i) {
    std::vector<double> x(1000), y(1000);
    for (double& v : x) v = u(gen);
    for (double& v : y) v = u(gen);
    if (reconnect::mutual_information(x, y, 16, 2) < 0.15) ++low;
  }
  bool independent_ok = low >= trials * 95 / 100;

  verdict(5, pearson_ok && mi_ok && independent_ok,
          fmt("pearson bounded with rho(x,x)=1 on 1000 fixtures; MI symmetric, "
              "non-negative, |MI(x,x)-H(x)| <= %.1e; independent-uniform MI < 0.15 nats "
              "in %d/%d trials (need >= 190)",
              worst_self, low, trials));
}

void criterion_6() {
  std::mt19937_64 gen(66);
  std::normal_distribution<double> coord(0.0, 5.0);
  std::uniform_int_distribution<int> len(2, 8);
  double worst_rel = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    int n = len(gen);
    std::vector<std::vector<double>> pts(n, std::vector<double>(2));
    for (auto& p : pts)
      for (double& v : p) v = coord(gen);
    double oracle = best_two_partition(pts);
    reconnect::KMeansResult res = reconnect::kmeans(pts, 2, 7000 + trial, 10);
    double rel = std::abs(res.objective - oracle) / std::max(1.0, oracle);
    worst_rel = std::max(worst_rel, rel);
  }
  verdict(6, worst_rel <= 1e-6,
          fmt("k-means matched exhaustive 2-partition on 50 instances, worst relative "
              "gap %.2e (need <= 1e-6)",
              worst_rel));
}

void criterion_7() {
  std::mt19937_64 gen(77);
  std::uniform_real_distribution<double> lat(-80.0, 80.0);
  std::uniform_real_distribution<double> lon(-180.0, 180.0);
  bool axioms = true;
  for (int i = 0; i < 200 && axioms; ++i) {
    GeoPoint a{lat(gen), lon(gen)}, b{lat(gen), lon(gen)}, c{lat(gen), lon(gen)};
    double ab = geodist_m(a, b), ba = geodist_m(b, a);
    double bc = geodist_m(b, c), ac = geodist_m(a, c);
    if (geodist_m(a, a) != 0.0) axioms = false;
    if (ab != ba || ab < 0.0) axioms = false;
    if (ac > (ab + bc) * (1.0 + 1e-6) + 1e-6) axioms = false;
  }
  double degree = geodist_m({0.0, 0.0}, {0.0, 1.0});
  bool anchor = std::abs(degree - 111195.0) <= 1.0;
  verdict(7, axioms && anchor,
          fmt("metric axioms hold on 200 random triples; one equatorial degree = %.2f m "
              "(need 111195 +/- 1)",
              degree));
}

void criterion_8() {
  synth::SynthConfig sc;
  sc.seed = 3;
  sc.n_transformers = 30;
  auto bundle = synth::generate_overload_scenario(sc);

  auto naive =
      validate::check_capacity(bundle.corrupted, bundle.series, bundle.constraints);
  std::size_t planted = naive.violations.size();

  pipeline::RunReport rep = pipeline::run_on(input_from(bundle), pipeline::PipelineConfig{});
  bool ok = planted >= 2 && rep.violations_after.empty() && rep.unresolved.empty();
  verdict(8, ok,
          fmt("overload scenario planted %zu capacity violations; %zu remain after the "
              "pipeline, %zu unresolved (need 0 and 0, none new)",
              planted, rep.violations_after.size(), rep.unresolved.size()));
}

void criterion_9() {
  synth::SynthConfig sc;
  sc.seed = 11;
  sc.n_transformers = 20;
  sc.n_steps = 288;
  auto bundle = synth::generate(sc);
  pipeline::PipelineConfig cfg;
  std::string a = pipeline::report_json(pipeline::run_on(input_from(bundle), cfg)).dump(2);
  std::string b = pipeline::report_json(pipeline::run_on(input_from(bundle), cfg)).dump(2);
  verdict(9, !a.empty() && a == b,
          fmt("two identical runs produced byte-identical %zu-byte reports", a.size()));
}

void criterion_10() {
  synth::SynthConfig sc;
  sc.seed = 5;
  sc.n_transformers = 30;
  auto bundle = synth::generate(sc);
  pipeline::PipelineConfig cfg;
  cfg.parallelism = 4;
  auto rows = pipeline::k_sweep(input_from(bundle), cfg, {2, 3, 4});
  for (const auto& r : rows)
    std::printf("  K=%zu reassignments=%zu agreement=%.3f\n", r.k, r.reassignments,
                r.agreement);
  bool ok = rows.size() == 3 && rows[1].agreement >= 0.95;
  verdict(10, ok,
          fmt("K sweep table emitted; K=2 vs K=3 agreement %.3f (need >= 0.95), K=4 "
              "free to diverge at %.3f",
              rows.size() > 1 ? rows[1].agreement : 0.0,
              rows.size() > 2 ? rows[2].agreement : 0.0));
}

}  // namespace

int main() {
  std::printf("acceptance run\n");
  guarded(1, criterion_1);
  guarded(2, criterion_2);
  guarded(3, criterion_3);
  guarded(4, criterion_4);
  guarded(5, criterion_5);
  guarded(6, criterion_6);
  guarded(7, criterion_7);
  guarded(8, criterion_8);
  guarded(9, criterion_9);
  guarded(10, criterion_10);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures;
}
