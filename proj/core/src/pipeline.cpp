// Copyright 2026-present the dann project
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dann/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <fstream>
#include <future>
#include <set>
#include <sstream>
#include <unordered_set>

#include "io_util.hpp"

namespace dann {

namespace {

constexpr char kGtMagic[8] = {'D', 'A', 'N', 'N', 'G', 'T', '0', '1'};
constexpr char kHeadMagic[8] = {'D', 'A', 'N', 'N', 'H', 'E', 'D', '1'};
constexpr char kCodeMagic[8] = {'D', 'A', 'N', 'N', 'C', 'O', 'D', '1'};

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return buf;
}

template <typename F>
auto stage(const char* name, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    raise(ErrorCode::stage_failed, std::string(name) + ": " + e.what());
  } catch (const std::exception& e) {
    raise(ErrorCode::stage_failed, std::string(name) + ": " + e.what());
  }
}

double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  size_t idx = static_cast<size_t>(q * static_cast<double>(v.size() - 1));
  return v[idx];
}

}  // namespace

Distribution parse_distribution(const std::string& name) {
  if (name == "gaussian") return Distribution::gaussian;
  if (name == "clustered" || name == "clustered-gaussian") return Distribution::clustered;
  if (name == "uniform") return Distribution::uniform;
  raise(ErrorCode::invalid_argument, "unknown distribution '" + name + "'");
}

VectorDataset gen_dataset(const GenParams& params) {
  if (params.n < 1) raise(ErrorCode::invalid_argument, "gen_dataset requires n >= 1");
  if (params.dim < 1) raise(ErrorCode::invalid_argument, "gen_dataset requires dim >= 1");

  std::vector<float> data(params.n * params.dim);
  Rng rng(params.seed);
  switch (params.dist) {
    case Distribution::gaussian:
      for (auto& x : data) x = static_cast<float>(rng.normal());
      break;
    case Distribution::uniform:
      for (auto& x : data) x = static_cast<float>(rng.uniform(-1.0, 1.0));
      break;
    case Distribution::clustered: {
      if (params.blobs < 1) raise(ErrorCode::invalid_argument, "clustered needs blobs >= 1");
      // Centers drawn with a minimum mutual separation of 4 blob radii
      // (rejection sampling, capped) so the blobs stay distinguishable.
      Rng center_rng(params.blob_seed.value_or(params.seed));
      std::vector<float> centers(static_cast<size_t>(params.blobs) * params.dim);
      double min_sep = 16.0 * static_cast<double>(params.blob_sigma) * params.blob_sigma *
                       params.dim;
      std::vector<float> candidate(params.dim), best(params.dim);
      for (uint32_t b = 0; b < params.blobs; ++b) {
        double best_sep = -1.0;
        for (int attempt = 0; attempt < 100; ++attempt) {
          for (auto& x : candidate)
            x = static_cast<float>(center_rng.normal() * params.blob_spread);
          double sep = std::numeric_limits<double>::max();
          for (uint32_t o = 0; o < b; ++o)
            sep = std::min(sep, static_cast<double>(l2_sq(
                                    candidate, std::span<const float>(
                                                   centers.data() +
                                                       static_cast<size_t>(o) * params.dim,
                                                   params.dim))));
          if (sep > best_sep) {
            best_sep = sep;
            best = candidate;
          }
          if (best_sep >= min_sep) break;
        }
        std::copy(best.begin(), best.end(),
                  centers.begin() + static_cast<size_t>(b) * params.dim);
      }
      for (uint64_t i = 0; i < params.n; ++i) {
        uint32_t b = static_cast<uint32_t>(rng.below(params.blobs));
        const float* c = centers.data() + static_cast<size_t>(b) * params.dim;
        float* out = data.data() + i * params.dim;
        for (uint32_t j = 0; j < params.dim; ++j)
          out[j] = c[j] + static_cast<float>(rng.normal() * params.blob_sigma);
      }
      break;
    }
  }
  return make_dataset(params.dim, std::move(data));
}

VectorDataset gen_dataset(uint64_t n, uint32_t dim, uint64_t seed,
                          const std::string& distribution) {
  GenParams p;
  p.n = n;
  p.dim = dim;
  p.seed = seed;
  p.dist = parse_distribution(distribution);
  return gen_dataset(p);
}

GroundTruth compute_ground_truth(const VectorDataset& ds, const VectorDataset& queries,
                                 uint32_t k, uint32_t threads) {
  if (queries.dim != ds.dim) raise(ErrorCode::dim_mismatch, "query dim != corpus dim");
  if (k > ds.count()) raise(ErrorCode::invalid_argument, "ground truth k > corpus size");
  GroundTruth gt;
  gt.k = k;
  gt.entries.resize(queries.count() * k);

  auto run = [&](size_t lo, size_t hi) {
    for (size_t i = lo; i < hi; ++i) {
      auto top = brute_force_topk(ds, queries.vec(i), k);
      std::copy(top.begin(), top.end(), gt.entries.begin() + i * k);
    }
  };
  if (threads > 1 && queries.count() > 8) {
    size_t per = (queries.count() + threads - 1) / threads;
    std::vector<std::future<void>> futs;
    for (uint32_t t = 0; t < threads; ++t) {
      size_t lo = static_cast<size_t>(t) * per, hi = std::min(queries.count(), lo + per);
      if (lo >= hi) break;
      futs.push_back(std::async(std::launch::async, run, lo, hi));
    }
    for (auto& f : futs) f.get();
  } else {
    run(0, queries.count());
  }
  return gt;
}

void write_ground_truth(const std::string& path, const GroundTruth& gt) {
  auto out = io::open_out(path);
  io::put_magic(out, kGtMagic);
  io::put_u32(out, gt.k);
  io::put_u64(out, gt.queries());
  for (const auto& s : gt.entries) {
    io::put_u64(out, s.id);
    io::put_f32(out, s.dist);
  }
  out.flush();
  if (!out) raise(ErrorCode::io_error, "write failed: " + path);
}

GroundTruth read_ground_truth(const std::string& path) {
  auto in = io::open_in(path);
  io::check_magic(in, kGtMagic, "ground truth");
  GroundTruth gt;
  gt.k = io::get_u32(in);
  uint64_t nq = io::get_u64(in);
  gt.entries.resize(nq * gt.k);
  for (auto& s : gt.entries) {
    s.id = io::get_u64(in);
    s.dist = io::get_f32(in);
  }
  return gt;
}

double recall_at_k(std::span<const ScoredId> results, std::span<const ScoredId> truth,
                   uint32_t k) {
  if (truth.size() < k) raise(ErrorCode::invalid_argument, "ground truth has fewer than k");
  std::unordered_set<uint64_t> want;
  for (uint32_t i = 0; i < k; ++i) want.insert(truth[i].id);
  size_t hit = 0;
  size_t take = std::min<size_t>(k, results.size());
  for (size_t i = 0; i < take; ++i)
    if (want.count(results[i].id)) ++hit;
  return static_cast<double>(hit) / static_cast<double>(k);
}

// ---- spec parsing ----

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<uint32_t> parse_u32_list(const std::string& s) {
  std::vector<uint32_t> out;
  for (const auto& item : split(s, ',')) out.push_back(std::stoul(item));
  return out;
}

std::vector<double> parse_f64_list(const std::string& s) {
  std::vector<double> out;
  for (const auto& item : split(s, ',')) out.push_back(std::stod(item));
  return out;
}

}  // namespace

ExperimentSpec ExperimentSpec::parse(std::istream& in) {
  ExperimentSpec spec;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    // trim
    auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    auto e = line.find_last_not_of(" \t\r");
    line = line.substr(b, e - b + 1);
    auto eq = line.find('=');
    if (eq == std::string::npos)
      raise(ErrorCode::invalid_argument,
            "spec line " + std::to_string(lineno) + " is not key=value");
    std::string key = line.substr(0, eq);
    std::string val = line.substr(eq + 1);
    try {
      if (key == "n") spec.n = std::stoull(val);
      else if (key == "dim") spec.dim = std::stoul(val);
      else if (key == "seed") spec.seed = std::stoull(val);
      else if (key == "distribution") spec.dist = parse_distribution(val);
      else if (key == "blobs") spec.blobs = std::stoul(val);
      else if (key == "blob_sigma") spec.blob_sigma = std::stof(val);
      else if (key == "blob_spread") spec.blob_spread = std::stof(val);
      else if (key == "queries") spec.queries = std::stoull(val);
      else if (key == "gt_k") spec.gt_k = std::stoul(val);
      else if (key == "p") spec.p = std::stoul(val);
      else if (key == "epsilon") spec.epsilon = std::stof(val);
      else if (key == "max_assign") spec.max_assign = std::stoul(val);
      else if (key == "cluster_iters") spec.cluster_iters = std::stoul(val);
      else if (key == "r") spec.r = std::stoul(val);
      else if (key == "l_build") spec.l_build = std::stoul(val);
      else if (key == "alpha") spec.alpha = std::stof(val);
      else if (key == "r_serve") spec.r_serve = std::stoul(val);
      else if (key == "head_frac") spec.head_frac = std::stod(val);
      else if (key == "m") spec.m = std::stoul(val);
      else if (key == "pq_iters") spec.pq_iters = std::stoul(val);
      else if (key == "pq_sample") spec.pq_sample = std::stoull(val);
      else if (key == "opq") spec.opq = (val == "1" || val == "true");
      else if (key == "num_shards") spec.num_shards = std::stoul(val);
      else if (key == "k") spec.k = std::stoul(val);
      else if (key == "l") spec.l = std::stoul(val);
      else if (key == "k_head") spec.k_head = std::stoul(val);
      else if (key == "h_grid") spec.h_grid = parse_u32_list(val);
      else if (key == "bw_grid") spec.bw_grid = parse_u32_list(val);
      else if (key == "failure_grid") spec.failure_grid = parse_f64_list(val);
      else if (key == "baseline_n_grid") spec.baseline_n_grid = parse_u32_list(val);
      else if (key == "baseline_m_grid") spec.baseline_m_grid = parse_u32_list(val);
      else if (key == "latency_ms") spec.latency_ms = std::stod(val);
      else if (key == "jitter_ms") spec.jitter_ms = std::stod(val);
      else if (key == "replicas") spec.replicas = std::stoul(val);
      else if (key == "hedge_ms") spec.hedge_ms = std::stod(val);
      else if (key == "timeout_ms") spec.timeout_ms = std::stod(val);
      else if (key == "transport_seed") spec.transport_seed = std::stoull(val);
      else if (key == "threads") spec.threads = std::stoul(val);
      else if (key == "out") spec.out = val;
      else raise(ErrorCode::invalid_argument, "unknown spec key '" + key + "'");
    } catch (const Error&) {
      throw;
    } catch (const std::exception&) {
      raise(ErrorCode::invalid_argument, "bad value for spec key '" + key + "'");
    }
  }
  spec.validate();
  return spec;
}

ExperimentSpec ExperimentSpec::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::io_error, "cannot open spec file: " + path);
  return parse(in);
}

void ExperimentSpec::validate() const {
  if (n < 256) raise(ErrorCode::invalid_argument, "spec needs n >= 256");
  if (dim == 0 || m == 0 || dim % m != 0)
    raise(ErrorCode::invalid_argument, "spec needs dim divisible by m");
  if (queries < 100) raise(ErrorCode::invalid_argument, "spec needs queries >= 100");
  if (h_grid.empty() || bw_grid.empty() || failure_grid.empty())
    raise(ErrorCode::invalid_argument, "spec grids must be non-empty");
  if (k > l) raise(ErrorCode::invalid_argument, "spec needs k <= l");
  for (uint32_t bw : bw_grid)
    if (bw > l) raise(ErrorCode::invalid_argument, "spec needs every bw <= l");
  for (double f : failure_grid)
    if (f < 0.0 || f > 1.0) raise(ErrorCode::invalid_argument, "failure rates must be in [0,1]");
  if (head_frac <= 0.0 || head_frac > 1.0)
    raise(ErrorCode::invalid_argument, "head_frac must be in (0,1]");
  if (p < 1 || p > n) raise(ErrorCode::invalid_argument, "spec needs 1 <= p <= n");
  if (num_shards < 1) raise(ErrorCode::invalid_argument, "spec needs num_shards >= 1");
  if (r_serve < 1) raise(ErrorCode::invalid_argument, "spec needs r_serve >= 1");
  for (uint32_t nsel : baseline_n_grid)
    if (nsel > p) raise(ErrorCode::invalid_argument, "baseline N must be <= P");
}

void RunReport::write(std::ostream& out) const {
  for (const auto& line : lines) out << line << "\n";
}

void RunReport::write_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) raise(ErrorCode::io_error, "cannot open report file: " + path);
  write(out);
  if (!out) raise(ErrorCode::io_error, "report write failed: " + path);
}

// ---- pipeline ----

BuiltIndex build_pipeline(const ExperimentSpec& spec) {
  spec.validate();
  BuiltIndex built;
  built.spec = spec;

  stage("gen", [&] {
    GenParams gp;
    gp.n = spec.n;
    gp.dim = spec.dim;
    gp.seed = spec.seed;
    gp.dist = spec.dist;
    gp.blobs = spec.blobs;
    gp.blob_sigma = spec.blob_sigma;
    gp.blob_spread = spec.blob_spread;
    gp.blob_seed = spec.seed;
    built.corpus = gen_dataset(gp);
    gp.n = spec.queries;
    gp.seed = spec.seed + 1000003;  // fresh samples, same blob centers
    built.queries = gen_dataset(gp);
  });

  stage("gt", [&] {
    built.gt = compute_ground_truth(built.corpus, built.queries,
                                    std::max(spec.gt_k, spec.k), spec.threads);
  });

  stage("cluster", [&] {
    ClusterParams cp;
    cp.p = spec.p;
    cp.epsilon = spec.epsilon;
    cp.max_assign = spec.max_assign;
    cp.iters = spec.cluster_iters;
    cp.seed = spec.seed + 17;
    cp.threads = spec.threads;
    built.pa = cluster_assign(built.corpus, cp);
  });

  stage("build", [&] {
    VamanaParams vp;
    vp.r = spec.r;
    vp.l_build = spec.l_build;
    vp.alpha = spec.alpha;
    vp.seed = spec.seed + 29;
    built.parts = build_partitions(built.corpus, built.pa, vp, spec.threads);
    built.part_data.resize(spec.p);
    for (uint32_t c = 0; c < spec.p; ++c) {
      const auto& member = built.parts.members[c];
      if (member.empty()) continue;
      auto& sub = built.part_data[c];
      sub.dim = built.corpus.dim;
      for (uint32_t pos : member) {
        sub.ids.push_back(pos);
        auto v = built.corpus.vec(pos);
        sub.data.insert(sub.data.end(), v.begin(), v.end());
      }
    }
  });

  stage("stitch", [&] {
    built.stitched = stitch(built.parts, built.pa, built.corpus, spec.r_serve);
  });

  stage("head", [&] {
    size_t want = static_cast<size_t>(spec.head_frac * static_cast<double>(spec.n));
    want = std::min<size_t>(std::max<size_t>(want, 1), built.corpus.count());
    built.head_positions = collect_head(built.parts, want);
    reinforce_reachability(built.stitched, built.corpus, built.head_positions);
    VamanaParams vp;
    vp.r = spec.r;
    vp.l_build = spec.l_build;
    vp.alpha = spec.alpha;
    vp.seed = spec.seed + 31;
    built.head = build_head_index(built.corpus, built.head_positions, vp);
  });

  stage("encode", [&] {
    uint64_t sample_n = std::min<uint64_t>(std::max<uint64_t>(spec.pq_sample, 256), spec.n);
    VectorDataset sample;
    if (sample_n == spec.n) {
      sample = built.corpus;
    } else {
      std::vector<uint32_t> order(spec.n);
      for (uint32_t i = 0; i < spec.n; ++i) order[i] = i;
      Rng rng(spec.seed + 41);
      for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
      sample.dim = spec.dim;
      for (uint64_t i = 0; i < sample_n; ++i) {
        sample.ids.push_back(i);
        auto v = built.corpus.vec(order[i]);
        sample.data.insert(sample.data.end(), v.begin(), v.end());
      }
    }
    PqTrainParams pp;
    pp.m = spec.m;
    pp.iters = spec.pq_iters;
    pp.seed = spec.seed + 43;
    pp.opq = spec.opq;
    pp.threads = spec.threads;
    built.cb = train_codebooks(sample, pp);
    built.codes = encode_dataset(built.corpus, built.cb, spec.threads);
    encode_head(built.head, built.cb);
  });

  stage("load", [&] {
    built.shards = load_shards(built.stitched, built.corpus, built.cb, built.codes,
                               spec.num_shards);
    built.shards.transport.fixed_ms = spec.latency_ms;
    built.shards.transport.jitter_ms = spec.jitter_ms;
    built.shards.transport.replicas = spec.replicas;
    built.shards.transport.hedge_delay_ms = spec.hedge_ms;
    built.shards.transport.timeout_ms = spec.timeout_ms;
    built.shards.transport.seed = spec.transport_seed;
    built.id_to_pos.reserve(built.corpus.count());
    for (uint32_t pos = 0; pos < built.corpus.count(); ++pos)
      built.id_to_pos[built.corpus.ids[pos]] = pos;
  });

  return built;
}

SweepPoint sweep_distributed(const BuiltIndex& built, uint32_t h, uint32_t bw, double failure) {
  const ExperimentSpec& spec = built.spec;
  ShardSet set = built.shards;
  set.transport.failure_rate = failure;
  SimTransport transport(set);

  SearchParams params;
  params.bw = bw;
  params.h = h;
  params.k = spec.k;
  params.l = spec.l;
  params.k_head = spec.k_head;

  SweepPoint pt;
  pt.h = h;
  pt.bw = bw;
  pt.failure = failure;
  pt.io_bound = h * bw;
  pt.queries = built.queries.count();

  double recall_sum = 0.0, io_sum = 0.0, req_sum = 0.0, resp_sum = 0.0, clusters_sum = 0.0,
         clusters_sq = 0.0;
  std::vector<double> latencies;
  latencies.reserve(built.queries.count());

  for (size_t qi = 0; qi < built.queries.count(); ++qi) {
    SearchResult res;
    try {
      res = search(built.queries.vec(qi), params, transport, built.head, built.cb,
                   *built.shards.sdc);
    } catch (const SearchFailure& e) {
      res.results = e.partial();
      res.stats = e.stats();
      ++pt.failed_queries;
    }
    recall_sum += recall_at_k(res.results, built.gt.per_query(qi), spec.k);
    io_sum += res.stats.io_used;
    pt.max_io = std::max(pt.max_io, res.stats.io_used);
    req_sum += static_cast<double>(res.stats.request_bytes);
    resp_sum += static_cast<double>(res.stats.response_bytes);
    latencies.push_back(res.stats.latency_ms);

    // Distinct home clusters among the keys this query read (the flexible
    // counterpart of the baseline's fixed N).
    std::set<uint32_t> clusters;
    for (const auto& hop : res.stats.hops)
      for (uint64_t key : hop.keys) {
        auto it = built.id_to_pos.find(key);
        if (it != built.id_to_pos.end()) clusters.insert(built.pa.membership[it->second][0]);
      }
    double c = static_cast<double>(clusters.size());
    clusters_sum += c;
    clusters_sq += c * c;
  }

  double nq = static_cast<double>(built.queries.count());
  pt.mean_recall = recall_sum / nq;
  pt.mean_io = io_sum / nq;
  pt.mean_request_bytes = req_sum / nq;
  pt.mean_response_bytes = resp_sum / nq;
  pt.p50_ms = percentile(latencies, 0.5);
  pt.p99_ms = percentile(latencies, 0.99);
  pt.mean_clusters_touched = clusters_sum / nq;
  pt.var_clusters_touched = clusters_sq / nq - pt.mean_clusters_touched * pt.mean_clusters_touched;
  return pt;
}

std::vector<ScoredId> partitioned_search(const BuiltIndex& built, std::span<const float> q,
                                         uint32_t n_sel, uint32_t m_io, uint32_t k, uint32_t l) {
  const auto& pa = built.pa;
  if (n_sel > pa.p) raise(ErrorCode::invalid_argument, "baseline N exceeds partition count");
  std::vector<ScoredId> ranked(pa.p);
  for (uint32_t c = 0; c < pa.p; ++c) ranked[c] = ScoredId{c, l2_sq(q, pa.centroid(c))};
  std::sort(ranked.begin(), ranked.end(), ScoredLess{});

  std::vector<std::vector<ScoredId>> lists;
  for (uint32_t i = 0; i < n_sel; ++i) {
    uint32_t c = static_cast<uint32_t>(ranked[i].id);
    if (built.parts.members[c].empty()) continue;
    auto trace = greedy_search(built.parts.graphs[c], built.part_data[c], q, l, k, m_io);
    std::vector<ScoredId> list;
    list.reserve(trace.results.size());
    for (const auto& s : trace.results) {
      uint32_t corpus_pos = static_cast<uint32_t>(built.part_data[c].ids[s.id]);
      list.push_back(ScoredId{built.corpus.ids[corpus_pos], s.dist});
    }
    std::sort(list.begin(), list.end(), ScoredLess{});  // global-id tie order
    lists.push_back(std::move(list));
  }
  return merge_partial(lists, k);
}

BaselinePoint sweep_partitioned(const BuiltIndex& built, uint32_t n_sel, uint32_t m_io) {
  const ExperimentSpec& spec = built.spec;
  BaselinePoint pt;
  pt.n_sel = n_sel;
  pt.m_io = m_io;
  pt.io = n_sel * m_io;
  pt.queries = built.queries.count();
  double recall_sum = 0.0;
  for (size_t qi = 0; qi < built.queries.count(); ++qi) {
    auto results = partitioned_search(built, built.queries.vec(qi), n_sel, m_io, spec.k, spec.l);
    recall_sum += recall_at_k(results, built.gt.per_query(qi), spec.k);
  }
  pt.mean_recall = recall_sum / static_cast<double>(built.queries.count());
  return pt;
}

std::string SweepPoint::to_line() const {
  return fmt("mode=distributed h=%u bw=%u failure=%.4f recall@k=%.6f mean_io=%.2f max_io=%u "
             "io_bound=%u p50_ms=%.3f p99_ms=%.3f req_bytes=%.1f resp_bytes=%.1f "
             "clusters_mean=%.3f clusters_var=%.3f failed_queries=%llu queries=%llu",
             h, bw, failure, mean_recall, mean_io, max_io, io_bound, p50_ms, p99_ms,
             mean_request_bytes, mean_response_bytes, mean_clusters_touched,
             var_clusters_touched, static_cast<unsigned long long>(failed_queries),
             static_cast<unsigned long long>(queries));
}

std::string BaselinePoint::to_line() const {
  return fmt("mode=partitioned n_sel=%u m_io=%u io=%u recall@k=%.6f queries=%llu", n_sel, m_io,
             io, mean_recall, static_cast<unsigned long long>(queries));
}

namespace {

std::string build_summary(const BuiltIndex& built) {
  const auto& spec = built.spec;
  return fmt("# corpus n=%llu dim=%u p=%u r=%u r_serve=%u m=%u head=%zu shards=%u queries=%llu",
             static_cast<unsigned long long>(spec.n), spec.dim, spec.p, spec.r, spec.r_serve,
             spec.m, built.head_positions.size(), spec.num_shards,
             static_cast<unsigned long long>(spec.queries));
}

}  // namespace

RunReport run_pipeline(const ExperimentSpec& spec) {
  auto built = build_pipeline(spec);
  RunReport report;
  report.add(build_summary(built));
  stage("sweep", [&] {
    for (double f : spec.failure_grid)
      for (uint32_t h : spec.h_grid)
        for (uint32_t bw : spec.bw_grid)
          report.add(sweep_distributed(built, h, bw, f).to_line());
  });
  if (!spec.out.empty()) report.write_file(spec.out);
  return report;
}

RunReport compare_partitioned(const ExperimentSpec& spec) {
  auto built = build_pipeline(spec);
  RunReport report;
  report.add(build_summary(built));

  std::vector<SweepPoint> dist;
  std::vector<BaselinePoint> base;
  stage("sweep", [&] {
    for (uint32_t h : spec.h_grid)
      for (uint32_t bw : spec.bw_grid) {
        dist.push_back(sweep_distributed(built, h, bw, 0.0));
        report.add(dist.back().to_line());
      }
    for (uint32_t nsel : spec.baseline_n_grid)
      for (uint32_t m : spec.baseline_m_grid) {
        base.push_back(sweep_partitioned(built, nsel, m));
        report.add(base.back().to_line());
      }
  });

  // Side-by-side at equal IO budgets.
  for (const auto& d : dist)
    for (const auto& b : base)
      if (d.io_bound == b.io)
        report.add(fmt("match io=%u distributed=%.6f partitioned=%.6f dominates=%d", d.io_bound,
                       d.mean_recall, b.mean_recall, d.mean_recall >= b.mean_recall ? 1 : 0));

  if (!spec.out.empty()) report.write_file(spec.out);
  return report;
}

// ---- head index and code files ----

void write_head_index(const std::string& path, const HeadIndex& head) {
  auto out = io::open_out(path);
  io::put_magic(out, kHeadMagic);
  io::put_u32(out, head.vectors.dim);
  io::put_u64(out, head.vectors.count());
  io::put_u64_array(out, head.vectors.ids);
  io::put_f32_array(out, head.vectors.data);
  io::put_u32(out, head.graph.entry);
  io::put_u32(out, head.graph.max_degree);
  for (const auto& list : head.graph.adj) {
    io::put_u32(out, static_cast<uint32_t>(list.size()));
    for (uint32_t nb : list) io::put_u32(out, nb);
  }
  out.flush();
  if (!out) raise(ErrorCode::io_error, "write failed: " + path);
}

HeadIndex read_head_index(const std::string& path, const Codebook& cb) {
  auto in = io::open_in(path);
  io::check_magic(in, kHeadMagic, "head index");
  HeadIndex head;
  head.vectors.dim = io::get_u32(in);
  uint64_t count = io::get_u64(in);
  head.vectors.ids.resize(count);
  io::get_u64_array(in, head.vectors.ids);
  head.vectors.data.resize(count * head.vectors.dim);
  io::get_f32_array(in, head.vectors.data);
  head.graph.entry = io::get_u32(in);
  head.graph.max_degree = io::get_u32(in);
  head.graph.adj.resize(count);
  for (uint64_t i = 0; i < count; ++i) {
    uint32_t deg = io::get_u32(in);
    head.graph.adj[i].resize(deg);
    for (uint32_t j = 0; j < deg; ++j) {
      head.graph.adj[i][j] = io::get_u32(in);
      if (head.graph.adj[i][j] >= count)
        raise(ErrorCode::bad_format, "head neighbor out of range");
    }
  }
  head.vectors.validate();
  encode_head(head, cb);
  return head;
}

void write_codes(const std::string& path, const CodeSet& codes) {
  auto out = io::open_out(path);
  io::put_magic(out, kCodeMagic);
  io::put_u64(out, codes.count());
  io::put_u32(out, codes.m);
  io::write_raw(out, codes.bytes.data(), codes.bytes.size());
  out.flush();
  if (!out) raise(ErrorCode::io_error, "write failed: " + path);
}

CodeSet read_codes(const std::string& path) {
  auto in = io::open_in(path);
  io::check_magic(in, kCodeMagic, "code");
  CodeSet codes;
  uint64_t count = io::get_u64(in);
  codes.m = io::get_u32(in);
  if (codes.m == 0) raise(ErrorCode::bad_format, "code file has m=0");
  codes.bytes.resize(count * codes.m);
  io::read_raw(in, codes.bytes.data(), codes.bytes.size());
  return codes;
}

}  // namespace dann
