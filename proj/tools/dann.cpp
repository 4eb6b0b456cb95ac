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

// dann command line: dataset generation, index build pipeline, servers and
// experiment sweeps. Exit codes: 0 success, 1 usage, 2 stage failure,
// 3 threshold failure (for CI gating).

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <thread>

#include "dann/pipeline.hpp"
#include "dann/server.hpp"

using namespace dann;

namespace {

std::atomic<bool> g_stop{false};

void handle_signal(int) { g_stop.store(true); }

void wait_for_signal() {
  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);
  while (!g_stop.load()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
}

struct ThresholdFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string part_graph_path(const std::string& dir, uint32_t part) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "part_%03u.graph", part);
  return (std::filesystem::path(dir) / buf).string();
}

std::string shard_file_path(const std::string& dir, uint32_t shard) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "shard_%03u.node", shard);
  return (std::filesystem::path(dir) / buf).string();
}

PartitionGraphs load_partition_graphs(const std::string& dir, const PartitionAssignment& pa) {
  PartitionGraphs parts;
  parts.members = partition_members(pa);
  parts.graphs.resize(pa.p);
  for (uint32_t c = 0; c < pa.p; ++c) {
    if (parts.members[c].empty()) continue;
    parts.graphs[c] = read_graph(part_graph_path(dir, c));
    if (parts.graphs[c].size() != parts.members[c].size())
      raise(ErrorCode::bad_format, "partition graph size does not match the assignment");
  }
  return parts;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"distributed graph ANN over a sharded node store"};
  app.require_subcommand(1);
  std::function<void()> run;

  // ---- gen ----
  {
    auto* cmd = app.add_subcommand("gen", "generate a vector dataset file");
    auto opt = std::make_shared<GenParams>();
    auto out = std::make_shared<std::string>();
    auto dist = std::make_shared<std::string>("gaussian");
    auto blob_seed = std::make_shared<int64_t>(-1);
    cmd->add_option("--out", *out, "output vector file")->required();
    cmd->add_option("--n", opt->n, "vector count")->required();
    cmd->add_option("--dim", opt->dim, "dimension")->required();
    cmd->add_option("--seed", opt->seed, "rng seed");
    cmd->add_option("--distribution", *dist, "gaussian | clustered | uniform");
    cmd->add_option("--blobs", opt->blobs, "blob count for clustered");
    cmd->add_option("--blob-seed", *blob_seed, "blob center seed (default: seed)");
    cmd->add_option("--blob-sigma", opt->blob_sigma, "within-blob std");
    cmd->add_option("--blob-spread", opt->blob_spread, "blob center std");
    cmd->callback([=, &run] {
      run = [=] {
        GenParams p = *opt;
        p.dist = parse_distribution(*dist);
        if (*blob_seed >= 0) p.blob_seed = static_cast<uint64_t>(*blob_seed);
        auto ds = gen_dataset(p);
        write_vectors(*out, ds);
        std::printf("wrote %zu x %u vectors to %s\n", ds.count(), ds.dim, out->c_str());
      };
    });
  }

  // ---- gt ----
  {
    auto* cmd = app.add_subcommand("gt", "compute brute-force ground truth");
    auto data = std::make_shared<std::string>();
    auto queries = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto k = std::make_shared<uint32_t>(10);
    auto threads = std::make_shared<uint32_t>(std::thread::hardware_concurrency());
    cmd->add_option("--data", *data, "corpus vector file")->required();
    cmd->add_option("--queries", *queries, "query vector file")->required();
    cmd->add_option("--out", *out, "ground truth output")->required();
    cmd->add_option("--k", *k, "neighbors per query");
    cmd->add_option("--threads", *threads, "worker threads");
    cmd->callback([=, &run] {
      run = [=] {
        auto ds = read_vectors(*data);
        auto qs = read_vectors(*queries);
        auto gt = compute_ground_truth(ds, qs, *k, *threads);
        write_ground_truth(*out, gt);
        std::printf("wrote gt k=%u for %zu queries to %s\n", gt.k, gt.queries(), out->c_str());
      };
    });
  }

  // ---- cluster ----
  {
    auto* cmd = app.add_subcommand("cluster", "closure clustering of the corpus");
    auto data = std::make_shared<std::string>();
    auto params = std::make_shared<ClusterParams>();
    auto assign_out = std::make_shared<std::string>();
    auto centroids_out = std::make_shared<std::string>();
    auto manifest_out = std::make_shared<std::string>();
    cmd->add_option("--data", *data, "corpus vector file")->required();
    cmd->add_option("--p", params->p, "partition count")->required();
    cmd->add_option("--epsilon", params->epsilon, "closure threshold");
    cmd->add_option("--max-assign", params->max_assign, "assignment cap");
    cmd->add_option("--iters", params->iters, "k-means iterations");
    cmd->add_option("--seed", params->seed, "rng seed");
    cmd->add_option("--threads", params->threads, "worker threads");
    cmd->add_option("--assign-out", *assign_out, "assignment file")->required();
    cmd->add_option("--centroids-out", *centroids_out, "centroid vector file");
    cmd->add_option("--manifest-out", *manifest_out, "partition manifest (text)");
    cmd->callback([=, &run] {
      run = [=] {
        auto ds = read_vectors(*data);
        auto pa = cluster_assign(ds, *params);
        write_assignment(*assign_out, pa);
        auto members = partition_members(pa);
        size_t amplified = 0;
        for (const auto& m : members) amplified += m.size();
        if (!centroids_out->empty()) {
          std::vector<uint64_t> ids(pa.p);
          for (uint32_t c = 0; c < pa.p; ++c) ids[c] = c;
          write_vectors(*centroids_out, make_dataset(pa.dim, pa.centroids, ids));
        }
        if (!manifest_out->empty()) {
          std::vector<size_t> counts;
          for (const auto& m : members) counts.push_back(m.size());
          write_manifest(*manifest_out, pa, counts);
        }
        std::printf("assigned %zu vectors into %u partitions (%zu with closure, x%.3f)\n",
                    ds.count(), pa.p, amplified,
                    static_cast<double>(amplified) / static_cast<double>(ds.count()));
      };
    });
  }

  // ---- build ----
  {
    auto* cmd = app.add_subcommand("build", "build one Vamana graph per partition");
    auto data = std::make_shared<std::string>();
    auto assign = std::make_shared<std::string>();
    auto out_dir = std::make_shared<std::string>();
    auto params = std::make_shared<VamanaParams>();
    auto threads = std::make_shared<uint32_t>(std::thread::hardware_concurrency());
    cmd->add_option("--data", *data, "corpus vector file")->required();
    cmd->add_option("--assign", *assign, "assignment file")->required();
    cmd->add_option("--out-dir", *out_dir, "graph output directory")->required();
    cmd->add_option("--r", params->r, "graph degree");
    cmd->add_option("--l-build", params->l_build, "build beam size");
    cmd->add_option("--alpha", params->alpha, "pruning slack");
    cmd->add_option("--seed", params->seed, "rng seed");
    cmd->add_option("--threads", *threads, "concurrent partition builds");
    cmd->callback([=, &run] {
      run = [=] {
        auto ds = read_vectors(*data);
        auto pa = read_assignment(*assign);
        std::filesystem::create_directories(*out_dir);
        auto parts = build_partitions(ds, pa, *params, *threads);
        for (const auto& warning : parts.warnings) std::fprintf(stderr, "warning: %s\n", warning.c_str());
        for (uint32_t c = 0; c < pa.p; ++c) {
          if (parts.members[c].empty()) continue;
          write_graph(part_graph_path(*out_dir, c), parts.graphs[c]);
        }
        std::printf("built %u partition graphs into %s\n", pa.p, out_dir->c_str());
      };
    });
  }

  // ---- stitch ----
  {
    auto* cmd = app.add_subcommand("stitch", "merge partition graphs into the unified graph");
    auto data = std::make_shared<std::string>();
    auto assign = std::make_shared<std::string>();
    auto graphs_dir = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto r_serve = std::make_shared<uint32_t>(24);
    cmd->add_option("--data", *data, "corpus vector file")->required();
    cmd->add_option("--assign", *assign, "assignment file")->required();
    cmd->add_option("--graphs-dir", *graphs_dir, "partition graph directory")->required();
    cmd->add_option("--r-serve", *r_serve, "serving degree cap");
    cmd->add_option("--out", *out, "stitched graph output")->required();
    cmd->callback([=, &run] {
      run = [=] {
        auto ds = read_vectors(*data);
        auto pa = read_assignment(*assign);
        auto parts = load_partition_graphs(*graphs_dir, pa);
        auto sg = stitch(parts, pa, ds, *r_serve);
        write_graph(*out, sg.graph);
        size_t multi = 0;
        for (uint32_t p : sg.provenance)
          if (p > 1) ++multi;
        std::printf("stitched %zu nodes (%zu multi-partition) into %s\n", sg.graph.size(),
                    multi, out->c_str());
      };
    });
  }

  // ---- head ----
  {
    auto* cmd = app.add_subcommand(
        "head", "collect the head set, build its index, reinforce reachability");
    auto data = std::make_shared<std::string>();
    auto assign = std::make_shared<std::string>();
    auto graphs_dir = std::make_shared<std::string>();
    auto stitched = std::make_shared<std::string>();
    auto stitched_out = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto frac = std::make_shared<double>(0.05);
    auto count = std::make_shared<uint64_t>(0);
    auto params = std::make_shared<VamanaParams>();
    auto r_serve = std::make_shared<uint32_t>(24);
    cmd->add_option("--data", *data, "corpus vector file")->required();
    cmd->add_option("--assign", *assign, "assignment file")->required();
    cmd->add_option("--graphs-dir", *graphs_dir, "partition graph directory")->required();
    cmd->add_option("--stitched", *stitched, "stitched graph file")->required();
    cmd->add_option("--stitched-out", *stitched_out,
                    "reinforced stitched graph output (default: rewrite input)");
    cmd->add_option("--out", *out, "head index output")->required();
    cmd->add_option("--frac", *frac, "head size as corpus fraction");
    cmd->add_option("--count", *count, "explicit head size (overrides --frac)");
    cmd->add_option("--r", params->r, "head graph degree");
    cmd->add_option("--l-build", params->l_build, "head build beam size");
    cmd->add_option("--alpha", params->alpha, "pruning slack");
    cmd->add_option("--seed", params->seed, "rng seed");
    cmd->add_option("--r-serve", *r_serve, "serving degree cap of the stitched graph");
    cmd->callback([=, &run] {
      run = [=] {
        auto ds = read_vectors(*data);
        auto pa = read_assignment(*assign);
        auto parts = load_partition_graphs(*graphs_dir, pa);
        size_t want = *count > 0 ? *count
                                 : static_cast<size_t>(*frac * static_cast<double>(ds.count()));
        want = std::min<size_t>(std::max<size_t>(want, 1), ds.count());
        auto positions = collect_head(parts, want);

        StitchedGraph sg;
        sg.graph = read_graph(*stitched);
        sg.r_serve = *r_serve;
        size_t edits = reinforce_reachability(sg, ds, positions);
        write_graph(stitched_out->empty() ? *stitched : *stitched_out, sg.graph);

        auto head = build_head_index(ds, positions, *params);
        write_head_index(*out, head);
        std::printf("head of %zu vectors written to %s (%zu reachability edits)\n",
                    positions.size(), out->c_str(), edits);
      };
    });
  }

  // ---- encode ----
  {
    auto* cmd = app.add_subcommand("encode", "train PQ codebooks and encode the corpus");
    auto data = std::make_shared<std::string>();
    auto params = std::make_shared<PqTrainParams>();
    auto sample = std::make_shared<uint64_t>(20000);
    auto cb_out = std::make_shared<std::string>();
    auto codes_out = std::make_shared<std::string>();
    cmd->add_option("--data", *data, "corpus vector file")->required();
    cmd->add_option("--m", params->m, "subspace count");
    cmd->add_option("--iters", params->iters, "k-means iterations");
    cmd->add_option("--seed", params->seed, "rng seed");
    cmd->add_option("--sample", *sample, "training sample size");
    cmd->add_flag("--opq", params->opq, "train an orthogonal rotation");
    cmd->add_option("--threads", params->threads, "worker threads");
    cmd->add_option("--codebook-out", *cb_out, "codebook output")->required();
    cmd->add_option("--codes-out", *codes_out, "corpus code output")->required();
    cmd->callback([=, &run] {
      run = [=] {
        auto ds = read_vectors(*data);
        VectorDataset training = ds;
        uint64_t take = std::min<uint64_t>(std::max<uint64_t>(*sample, 256), ds.count());
        if (take < ds.count()) {
          std::vector<uint32_t> order(ds.count());
          for (uint32_t i = 0; i < order.size(); ++i) order[i] = i;
          Rng rng(params->seed + 41);
          for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
          VectorDataset sub;
          sub.dim = ds.dim;
          for (uint64_t i = 0; i < take; ++i) {
            sub.ids.push_back(i);
            auto v = ds.vec(order[i]);
            sub.data.insert(sub.data.end(), v.begin(), v.end());
          }
          training = std::move(sub);
        }
        auto cb = train_codebooks(training, *params);
        write_codebook(*cb_out, cb);
        auto codes = encode_dataset(ds, cb, std::max(1u, params->threads));
        write_codes(*codes_out, codes);
        std::printf("codebook m=%u mse=%.4f; %zu codes written\n", cb.m,
                    quantization_mse(training, cb), codes.count());
      };
    });
  }

  // ---- load ----
  {
    auto* cmd = app.add_subcommand("load", "pack the stitched graph into shard files");
    auto data = std::make_shared<std::string>();
    auto stitched = std::make_shared<std::string>();
    auto cb_path = std::make_shared<std::string>();
    auto codes_path = std::make_shared<std::string>();
    auto out_dir = std::make_shared<std::string>();
    auto num_shards = std::make_shared<uint32_t>(4);
    auto r_serve = std::make_shared<uint32_t>(24);
    cmd->add_option("--data", *data, "corpus vector file")->required();
    cmd->add_option("--stitched", *stitched, "stitched graph file")->required();
    cmd->add_option("--codebook", *cb_path, "codebook file")->required();
    cmd->add_option("--codes", *codes_path, "corpus code file")->required();
    cmd->add_option("--num-shards", *num_shards, "shard count");
    cmd->add_option("--r-serve", *r_serve, "serving degree cap");
    cmd->add_option("--out-dir", *out_dir, "shard output directory")->required();
    cmd->callback([=, &run] {
      run = [=] {
        auto ds = read_vectors(*data);
        StitchedGraph sg;
        sg.graph = read_graph(*stitched);
        sg.r_serve = *r_serve;
        sg.provenance.assign(sg.graph.size(), 1);
        auto cb = read_codebook(*cb_path);
        auto codes = read_codes(*codes_path);
        auto set = load_shards(sg, ds, cb, codes, *num_shards);
        std::filesystem::create_directories(*out_dir);
        for (uint32_t s = 0; s < set.num_shards(); ++s)
          write_shard(shard_file_path(*out_dir, s), *set.shards[s]);
        std::printf("loaded %zu nodes into %u shard files under %s\n", set.total_nodes(),
                    set.num_shards(), out_dir->c_str());
      };
    });
  }

  // ---- serve-shard ----
  {
    auto* cmd = app.add_subcommand("serve-shard", "run the node scoring service for one shard");
    auto shard_file = std::make_shared<std::string>();
    auto cb_path = std::make_shared<std::string>();
    auto listen = std::make_shared<std::string>("127.0.0.1:0");
    auto inject = std::make_shared<InjectParams>();
    auto seed = std::make_shared<uint64_t>(1);
    cmd->add_option("--shard-file", *shard_file, "shard node file")->required();
    cmd->add_option("--codebook", *cb_path, "codebook file")->required();
    cmd->add_option("--listen", *listen, "host:port (port 0 = ephemeral)");
    cmd->add_option("--failure-rate", inject->failure_rate, "injected failure probability");
    cmd->add_option("--latency-ms", inject->latency_ms, "injected fixed latency");
    cmd->add_option("--jitter-ms", inject->jitter_ms, "injected uniform jitter");
    cmd->add_option("--seed", *seed, "injection rng seed");
    cmd->callback([=, &run] {
      run = [=] {
        auto cb = read_codebook(*cb_path);
        auto sdc = std::make_shared<const SdcTable>(build_sdc_table(cb));
        auto shard = read_shard(*shard_file, sdc);
        ShardServer server(shard, *inject, *seed);
        auto addr = net::Addr::parse(*listen);
        uint16_t port = server.start(addr.host, addr.port);
        std::printf("shard %u/%u serving %zu nodes on %s:%u\n", shard->shard_id(),
                    shard->num_shards(), shard->node_count(), addr.host.c_str(), port);
        std::fflush(stdout);
        wait_for_signal();
        server.stop();
      };
    });
  }

  // ---- serve-orchestrator ----
  {
    auto* cmd = app.add_subcommand("serve-orchestrator", "run the orchestration service");
    auto shards = std::make_shared<std::string>();
    auto head_file = std::make_shared<std::string>();
    auto cb_path = std::make_shared<std::string>();
    auto listen = std::make_shared<std::string>("127.0.0.1:0");
    auto params = std::make_shared<SearchParams>();
    auto hedge_ms = std::make_shared<double>(-1.0);
    auto timeout_ms = std::make_shared<double>(10000.0);
    cmd->add_option("--shards", *shards, "shard addresses: h:p,h:p ('|' separates replicas)")
        ->required();
    cmd->add_option("--head-file", *head_file, "head index file")->required();
    cmd->add_option("--codebook", *cb_path, "codebook file")->required();
    cmd->add_option("--listen", *listen, "host:port (port 0 = ephemeral)");
    cmd->add_option("--bw", params->bw, "default beam width");
    cmd->add_option("--hops", params->h, "default hop count");
    cmd->add_option("--k", params->k, "default result count");
    cmd->add_option("--l", params->l, "default candidate size");
    cmd->add_option("--k-head", params->k_head, "default head seeds");
    cmd->add_option("--hedge-ms", *hedge_ms, "hedge delay (negative = off)");
    cmd->add_option("--timeout-ms", *timeout_ms, "per-call timeout");
    cmd->callback([=, &run] {
      run = [=] {
        auto cb = read_codebook(*cb_path);
        auto sdc = build_sdc_table(cb);
        auto head = read_head_index(*head_file, cb);
        auto addrs = net::parse_shard_list(*shards);
        TransportConfig cfg;
        cfg.timeout_ms = *timeout_ms;
        if (*hedge_ms >= 0.0) cfg.hedge_delay_ms = *hedge_ms;
        uint32_t max_replicas = 1;
        for (const auto& r : addrs)
          max_replicas = std::max<uint32_t>(max_replicas, static_cast<uint32_t>(r.size()));
        cfg.replicas = max_replicas;
        OrchestratorServer server(std::move(head), std::move(cb), std::move(sdc), addrs, cfg,
                                  *params);
        auto addr = net::Addr::parse(*listen);
        uint16_t port = server.start(addr.host, addr.port);
        std::printf("orchestrator over %zu shards on %s:%u\n", addrs.size(), addr.host.c_str(),
                    port);
        std::fflush(stdout);
        wait_for_signal();
        server.stop();
      };
    });
  }

  // ---- query ----
  {
    auto* cmd = app.add_subcommand("query", "send queries to a running orchestrator");
    auto orch = std::make_shared<std::string>();
    auto queries_path = std::make_shared<std::string>();
    auto count = std::make_shared<uint64_t>(0);
    auto params = std::make_shared<SearchParams>();
    auto hops = std::make_shared<uint32_t>(6);
    auto timeout_ms = std::make_shared<double>(30000.0);
    cmd->add_option("--orchestrator", *orch, "orchestrator host:port")->required();
    cmd->add_option("--queries", *queries_path, "query vector file")->required();
    cmd->add_option("--count", *count, "number of queries to send (0 = all)");
    cmd->add_option("--bw", params->bw, "beam width");
    cmd->add_option("--hops", *hops, "hop count");
    cmd->add_option("--k", params->k, "result count");
    cmd->add_option("--l", params->l, "candidate size");
    cmd->add_option("--k-head", params->k_head, "head seeds");
    cmd->add_option("--timeout-ms", *timeout_ms, "round-trip timeout");
    cmd->callback([=, &run] {
      run = [=] {
        auto qs = read_vectors(*queries_path);
        auto addr = net::Addr::parse(*orch);
        uint64_t n = *count == 0 ? qs.count() : std::min<uint64_t>(*count, qs.count());
        for (uint64_t i = 0; i < n; ++i) {
          wire::QueryRequest req;
          req.request_id = i;
          auto q = qs.vec(i);
          req.q.assign(q.begin(), q.end());
          req.bw = params->bw;
          req.h = *hops;
          req.k = params->k;
          req.l = params->l;
          req.k_head = params->k_head;
          auto resp = query_orchestrator(addr, req, *timeout_ms);
          std::printf("query=%llu status=%u io=%u hops=%u results=",
                      static_cast<unsigned long long>(i), static_cast<unsigned>(resp.status),
                      resp.io_used, resp.hops_executed);
          for (size_t j = 0; j < resp.results.size(); ++j)
            std::printf("%s%llu:%.6f", j ? ";" : "",
                        static_cast<unsigned long long>(resp.results[j].id),
                        resp.results[j].dist);
          std::printf("\n");
        }
      };
    });
  }

  // ---- sweep ----
  {
    auto* cmd = app.add_subcommand("sweep", "run the full pipeline and the search grid");
    auto spec_path = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto min_recall = std::make_shared<double>(-1.0);
    cmd->add_option("--spec", *spec_path, "experiment spec (key=value lines)")->required();
    cmd->add_option("--out", *out, "report path (overrides spec out=)");
    cmd->add_option("--min-recall", *min_recall,
                    "exit 3 unless some grid point reaches this recall");
    cmd->callback([=, &run] {
      run = [=] {
        auto spec = ExperimentSpec::parse_file(*spec_path);
        if (!out->empty()) spec.out = *out;
        auto report = run_pipeline(spec);
        report.write(std::cout);
        if (*min_recall >= 0.0) {
          double best = 0.0;
          for (const auto& line : report.lines) {
            auto pos = line.find("recall@k=");
            if (pos != std::string::npos) best = std::max(best, std::stod(line.substr(pos + 9)));
          }
          if (best < *min_recall)
            throw ThresholdFailure("best recall " + std::to_string(best) +
                                   " below required " + std::to_string(*min_recall));
        }
      };
    });
  }

  // ---- compare ----
  {
    auto* cmd = app.add_subcommand(
        "compare", "distributed vs clustered-partitioning baseline at matched IO");
    auto spec_path = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto require_dominance = std::make_shared<bool>(false);
    cmd->add_option("--spec", *spec_path, "experiment spec (key=value lines)")->required();
    cmd->add_option("--out", *out, "report path (overrides spec out=)");
    cmd->add_flag("--require-dominance", *require_dominance,
                  "exit 3 unless distributed >= partitioned at every matched budget");
    cmd->callback([=, &run] {
      run = [=] {
        auto spec = ExperimentSpec::parse_file(*spec_path);
        if (!out->empty()) spec.out = *out;
        auto report = compare_partitioned(spec);
        report.write(std::cout);
        if (*require_dominance) {
          for (const auto& line : report.lines)
            if (line.find("dominates=0") != std::string::npos)
              throw ThresholdFailure("baseline beat distributed: " + line);
        }
      };
    });
  }

  // ---- inject ----
  {
    auto* cmd = app.add_subcommand("inject", "set failure/latency injection on a shard server");
    auto target = std::make_shared<std::string>();
    auto req = std::make_shared<wire::InjectRequest>();
    cmd->add_option("--target", *target, "shard server host:port")->required();
    cmd->add_option("--failure-rate", req->failure_rate, "failure probability")->required();
    cmd->add_option("--latency-ms", req->latency_ms, "fixed latency");
    cmd->add_option("--jitter-ms", req->jitter_ms, "uniform jitter");
    cmd->callback([=, &run] {
      run = [=] {
        auto resp = send_inject(net::Addr::parse(*target), *req);
        std::printf("inject %s: status=%u\n", target->c_str(),
                    static_cast<unsigned>(resp.status));
        if (resp.status != wire::Status::ok)
          raise(ErrorCode::protocol, "shard rejected the inject request");
      };
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const ThresholdFailure& e) {
    std::fprintf(stderr, "threshold failure: %s\n", e.what());
    return 3;
  }

  try {
    if (run) run();
  } catch (const ThresholdFailure& e) {
    std::fprintf(stderr, "threshold failure: %s\n", e.what());
    return 3;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
