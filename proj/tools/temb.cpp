#include "temb/datasets.hpp"
#include "temb/io.hpp"
#include "temb/terminal.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <thread>

using namespace temb;

namespace {

enum Exit { kOk = 0, kVerifyFailed = 1, kIoError = 2, kCapExceeded = 3 };

std::size_t thread_count() {
  std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("TEMB_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return std::min(hw, static_cast<std::size_t>(v));
  }
  return hw;
}

template <typename F>
void parallel_for(std::size_t count, F&& body) {
  const std::size_t threads = std::min(thread_count(), std::max<std::size_t>(1, count));
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i; (i = next++) < count;) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = count;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

struct Options {
  std::string input, output, config, queries, embeddings, report;
  std::string backend = "trivial";
  std::string median_jl = "off";
  std::vector<std::size_t> sizes{4096, 16384, 32768};
  std::optional<double> eps;
  std::uint64_t seed = 1;
  std::size_t dim = 8;
  std::size_t query_count = 200;
};

TerminalConfig make_config(const Options& o) {
  TerminalConfig config;
  if (o.backend == "lsh") apply_lsh_preset(config);
  if (o.median_jl == "on") config.median_jl = true;
  if (!o.config.empty()) apply_config_file(config, o.config);
  if (o.eps) config.eps = *o.eps;
  return config;
}

int cmd_build(const Options& o) {
  TerminalConfig config = make_config(o);
  PointSet X = read_points(o.input);
  auto start = std::chrono::steady_clock::now();
  TerminalIndex index = TerminalIndex::build(X, config, o.seed);
  double elapsed = seconds_since(start);
  save_index(index, o.output);
  std::ifstream written(o.output, std::ios::binary | std::ios::ate);
  const auto& A = index.aann();
  std::cout << "points\t" << X.n() << "\n"
            << "unique\t" << index.geometry().X.n() << "\n"
            << "sketch_rows\t" << index.sketch().k() << "\n"
            << "tree_nodes\t" << A.tree.nodes.size() << "\n"
            << "tree_size\t" << A.tree.total_size << "\n"
            << "tree_depth\t" << A.tree.depth() << "\n"
            << "aann_ladder\t" << A.nodes.front().ladder << "\n"
            << "aann_copies\t" << A.copies << "\n"
            << "aann_refs\t" << A.stored << "\n"
            << "bytes\t" << static_cast<long long>(written.tellg()) << "\n"
            << "seconds\t" << elapsed << "\n";
  return kOk;
}

int cmd_embed(const Options& o) {
  TerminalIndex index = load_index(o.input);
  Matrix Q = read_matrix(o.queries);
  const auto d = static_cast<Eigen::Index>(index.input().d());
  if (Q.cols() > 0 && Q.rows() != d) throw IoError("query dimension does not match the index");
  const auto k = static_cast<Eigen::Index>(index.sketch().k());
  Matrix Z(k + 1, Q.cols());
  std::vector<EmbeddingResult> results(static_cast<std::size_t>(Q.cols()));
  std::vector<double> times(results.size());
  parallel_for(results.size(), [&](std::size_t i) {
    Rng rng(derive_seed(o.seed, {i}));
    auto start = std::chrono::steady_clock::now();
    results[i] = index.embed(Q.col(static_cast<Eigen::Index>(i)), rng);
    times[i] = seconds_since(start);
    Z.col(static_cast<Eigen::Index>(i)) = results[i].z;
  });
  write_matrix(o.output, Z);
  if (!o.report.empty()) {
    std::ofstream rep(o.report);
    if (!rep) throw IoError("cannot open " + o.report);
    rep << "query\tanchor\tanchor_distance\tmax_over\tmax_under\tprobes\titerations\tseconds\n";
    for (std::size_t i = 0; i < results.size(); ++i) {
      Distortion D = verify_embedding(index.input(), index.sketch().matrix, Q.col(static_cast<Eigen::Index>(i)),
                                      results[i].z);
      rep << i << '\t' << results[i].anchor << '\t' << results[i].anchor_distance << '\t' << D.max_over << '\t'
          << D.max_under << '\t' << results[i].probes << '\t' << results[i].iterations << '\t' << times[i] << "\n";
    }
  }
  std::cerr << "embedded " << results.size() << " queries\n";
  return kOk;
}

int cmd_verify(const Options& o) {
  TerminalIndex index = load_index(o.input);
  Matrix Q = read_matrix(o.queries);
  Matrix Z = read_matrix(o.embeddings);
  const auto d = static_cast<Eigen::Index>(index.input().d());
  const auto k = static_cast<Eigen::Index>(index.sketch().k());
  if (Q.cols() != Z.cols()) throw IoError("query and embedding counts differ");
  if (Q.cols() > 0 && (Q.rows() != d || Z.rows() != k + 1)) throw IoError("query or embedding dimension mismatch");
  const double tol = index.config().eps_acc;
  std::size_t failed = 0;
  std::cout << "query\tnearest\tnearest_distance\tmax_over\tmax_under\tpass\n";
  for (Eigen::Index i = 0; i < Q.cols(); ++i) {
    const Vector q = Q.col(i);
    Nearest nn = brute_nearest(index.input(), q);
    Distortion D = verify_embedding(index.input(), index.sketch().matrix, q, Z.col(i));
    bool pass = D.max_over <= tol && D.max_under <= tol;
    failed += !pass;
    std::cout << i << '\t' << nn.index << '\t' << nn.distance << '\t' << D.max_over << '\t' << D.max_under << '\t'
              << (pass ? "yes" : "no") << "\n";
  }
  std::cout << "# queries=" << Q.cols() << " failed=" << failed << " eps_acc=" << tol << "\n";
  return failed ? kVerifyFailed : kOk;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v.empty() ? 0.0 : v[v.size() / 2];
}

int cmd_bench(const Options& o) {
  if (!std::is_sorted(o.sizes.begin(), o.sizes.end())) throw IoError("sizes must be ascending");
  TerminalConfig config = make_config(o);
  if (!o.eps && o.config.empty()) config.eps = 0.5;
  std::cout << "n\tbackend\tmedian_probes\tprobe_ratio\tmedian_seconds\tbuild_seconds\n";
  std::vector<double> logn, logp;
  for (std::size_t n : o.sizes) {
    PointSet all = gaussian_mixture(n + o.query_count, o.dim, 16, 4.0, derive_seed(o.seed, {n}));
    PointSet X(all.matrix().leftCols(static_cast<Eigen::Index>(n)));
    auto start = std::chrono::steady_clock::now();
    TerminalIndex index = TerminalIndex::build(X, config, derive_seed(o.seed, {n, 1}));
    double build = seconds_since(start);
    std::vector<double> probes(o.query_count), times(o.query_count);
    parallel_for(o.query_count, [&](std::size_t i) {
      Rng rng(derive_seed(o.seed, {n, 2, i}));
      auto t0 = std::chrono::steady_clock::now();
      auto res = index.embed(all.col(n + i), rng);
      times[i] = seconds_since(t0);
      probes[i] = static_cast<double>(res.probes);
    });
    double mp = median(probes);
    std::cout << n << '\t' << o.backend << '\t' << mp << '\t' << mp / static_cast<double>(n) << '\t' << median(times)
              << '\t' << build << std::endl;
    logn.push_back(std::log(static_cast<double>(n)));
    logp.push_back(std::log(std::max(mp, 1.0)));
  }
  if (logn.size() >= 2) {
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < logn.size(); ++i) mx += logn[i], my += logp[i];
    mx /= static_cast<double>(logn.size());
    my /= static_cast<double>(logn.size());
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < logn.size(); ++i) {
      sxy += (logn[i] - mx) * (logp[i] - my);
      sxx += (logn[i] - mx) * (logn[i] - mx);
    }
    std::cout << "# probe exponent " << (sxx > 0 ? sxy / sxx : 0.0) << "\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Terminal embeddings: build, embed, verify, bench"};
  app.require_subcommand(1);
  Options o;
  auto common = [&o](CLI::App* c) {
    c->add_option("--config", o.config, "flat key = value config file");
    c->add_option("--backend", o.backend, "hashing backends")->check(CLI::IsMember({"trivial", "lsh"}));
    c->add_option("--median-jl", o.median_jl, "sampled sketch ensemble")->check(CLI::IsMember({"on", "off"}));
    c->add_option("--eps", o.eps, "target distortion");
    c->add_option("--seed", o.seed, "random seed");
  };
  auto* build = app.add_subcommand("build", "build an index from a point file");
  common(build);
  build->add_option("--input", o.input, "points (binary or CSV)")->required();
  build->add_option("--output", o.output, "index file")->required();

  auto* embed = app.add_subcommand("embed", "embed queries with a stored index");
  embed->add_option("--input", o.input, "index file")->required();
  embed->add_option("--queries", o.queries, "query points")->required();
  embed->add_option("--output", o.output, "embeddings, k + 1 coordinates each")->required();
  embed->add_option("--seed", o.seed, "query seed");
  embed->add_option("--report", o.report, "per-query TSV report");

  auto* verify = app.add_subcommand("verify", "check embeddings against the terminal set");
  verify->add_option("--input", o.input, "index file")->required();
  verify->add_option("--queries", o.queries, "query points")->required();
  verify->add_option("--embeddings", o.embeddings, "embeddings from embed")->required();

  auto* bench = app.add_subcommand("bench", "probe counts on synthetic mixtures");
  common(bench);
  bench->add_option("--sizes", o.sizes, "ascending dataset sizes")->delimiter(',');
  bench->add_option("--dim", o.dim, "dimension");
  bench->add_option("--queries", o.query_count, "queries per size");

  CLI11_PARSE(app, argc, argv);
  try {
    if (build->parsed()) return cmd_build(o);
    if (embed->parsed()) return cmd_embed(o);
    if (verify->parsed()) return cmd_verify(o);
    return cmd_bench(o);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIoError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIoError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kCapExceeded;
  }
}
