#include "fluxfed/federation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "fluxfed/errors.hpp"
#include "fluxfed/logging.hpp"

namespace fluxfed {

using nlohmann::json;

namespace {

// Slot-indexed parallel map: fn(i) owns slot i exclusively, so results are
// byte-identical for every thread count. Exceptions propagate (first one wins).
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
    std::size_t workers = std::min<std::size_t>(std::max(threads, 1), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

std::vector<std::size_t> known_cluster_sizes(const FederationState& st) {
    if (!st.triggered) return {};
    std::vector<std::size_t> sizes(static_cast<std::size_t>(st.clusters.num_clusters), 0);
    for (int c : st.client_cluster)
        if (c >= 0) ++sizes[static_cast<std::size_t>(c)];
    return sizes;
}

std::vector<int> train_labels_of(const ClientDataset& ds) {
    return std::vector<int>(ds.labels.begin(),
                            ds.labels.begin() + static_cast<std::ptrdiff_t>(ds.train_count));
}

// Descriptor through the frozen reference model, with the run's privacy noise
// if configured. event_round keys the noise stream: every (client, round)
// extraction event draws fresh, non-overlapping noise.
DescriptorVector make_descriptor(const FederationState& st, const Matrix& latents,
                                 const std::vector<int>* labels, int client_id, int event_round) {
    std::optional<DpParams> dp;
    std::optional<RngStream> dp_rng;
    const DpParams* dp_ptr = nullptr;
    RngStream* rng_ptr = nullptr;
    if (st.cfg.dp_epsilon) {
        dp.emplace(DpParams{*st.cfg.dp_epsilon, st.bounds});
        dp_rng.emplace(derive_stream(st.cfg.seed, stream_tag::kDpNoise,
                                     static_cast<std::uint64_t>(client_id),
                                     static_cast<std::uint64_t>(event_round)));
        dp_ptr = &*dp;
        rng_ptr = &*dp_rng;
    }
    return extract_descriptor(latents, labels, st.cfg.num_classes, st.pca, st.cfg.descriptor,
                              dp_ptr, rng_ptr);
}

// Centroid invariant: after any membership change, each centroid is the exact
// mean of its current members' stored descriptors (full and prefix variants).
void recompute_centroids(FederationState& st) {
    std::vector<DescriptorVector> descs;
    std::vector<int> assign;
    for (std::size_t k = 0; k < st.client_descriptor.size(); ++k) {
        if (st.client_cluster[k] >= 0 && st.client_descriptor[k]) {
            descs.push_back(*st.client_descriptor[k]);
            assign.push_back(st.client_cluster[k]);
        }
    }
    st.full_centroids = compute_centroids(descs, assign, st.clusters.num_clusters, false);
    st.clusters.centroids = compute_centroids(descs, assign, st.clusters.num_clusters, true);
}

std::vector<double> prefix_of(const DescriptorVector& d) {
    return std::vector<double>(d.values.begin(),
                               d.values.begin() + static_cast<std::ptrdiff_t>(d.label_free_len));
}

// Fires once: freeze the reference, broadcast bounds + projection, extract
// participant descriptors, cluster, and seed every cluster model from the
// current global parameters.
void fire_trigger(FederationState& st, const std::vector<ClientDataset>& clients,
                  const std::vector<int>& participants, int round, int threads,
                  RoundRecord& rec) {
    const ExperimentConfig& cfg = st.cfg;
    const std::size_t n = participants.size();
    st.reference = st.global;

    std::vector<Matrix> latents(n);
    std::vector<AlignmentBounds> local(n);
    parallel_for(n, threads, [&](std::size_t i) {
        const ClientDataset& ds = clients[static_cast<std::size_t>(participants[i])];
        latents[i] = st.reference.latents(ds.train_view());
        local[i] = local_bounds(latents[i]);
    });
    st.bounds = merge_bounds(local);
    st.pca = fit_shared_pca(st.bounds, cfg.descriptor_dim, cfg.pca_box_samples,
                            hash_combine64(cfg.seed, stream_tag::kPca));
    st.pca_ready = true;

    std::vector<DescriptorVector> descs(n);
    parallel_for(n, threads, [&](std::size_t i) {
        int k = participants[i];
        const ClientDataset& ds = clients[static_cast<std::size_t>(k)];
        std::vector<int> ytr = train_labels_of(ds);
        descs[i] = make_descriptor(st, latents[i], &ytr, k, round);
    });

    ClusterState cs;
    if (cfg.mode == Mode::Flux) {
        if (n >= 3) rec.dbscan_epsilon = elbow_epsilon(second_nn_curve(descs), cfg.dbscan_scale);
        cs = dbscan_adaptive(descs, cfg.dbscan_scale);
    } else {
        cs = kmeans_prior(descs, static_cast<int>(cfg.shift.num_distributions),
                          hash_combine64(cfg.seed, stream_tag::kKmeans));
    }

    st.triggered = true;
    st.trigger_round = round;
    st.clusters = cs;
    for (std::size_t i = 0; i < n; ++i) {
        int k = participants[i];
        st.client_cluster[static_cast<std::size_t>(k)] = cs.assignment[i];
        st.client_descriptor[static_cast<std::size_t>(k)] = std::move(descs[i]);
    }
    recompute_centroids(st);
    st.cluster_models.assign(static_cast<std::size_t>(cs.num_clusters), st.global);
    rec.triggered = true;
    FLUX_FED_LOG(LogLevel::Info, "trigger fired at round " << round << ": " << cs.num_clusters
                                 << " cluster(s) from " << n << " participant(s)");
}

}  // namespace

bool should_trigger(const std::vector<double>& accuracy_history, int round, int total_rounds,
                    double threshold) {
    if (round < 1 || accuracy_history.size() < static_cast<std::size_t>(round))
        throw std::invalid_argument("should_trigger: history shorter than round index");
    if (round < 3) return false;
    if (5 * round >= 4 * total_rounds) return true;  // spent 80% of the budget
    double worst_gain = std::numeric_limits<double>::infinity();
    for (int rp = 3; rp <= round; ++rp) {
        double gain = accuracy_history[static_cast<std::size_t>(rp - 1)] -
                      accuracy_history[static_cast<std::size_t>(rp - 2)];
        worst_gain = std::min(worst_gain, gain);
    }
    return worst_gain < threshold;
}

std::string round_record_to_json_line(const RoundRecord& rec) {
    json j;
    j["round"] = rec.round;
    j["participants"] = rec.participants;
    j["cluster_sizes"] = rec.cluster_sizes;
    j["accuracy"] = rec.accuracy;
    j["triggered"] = rec.triggered;
    if (rec.dbscan_epsilon)
        j["dbscan_epsilon"] = *rec.dbscan_epsilon;
    else
        j["dbscan_epsilon"] = nullptr;
    j["num_models"] = rec.num_models;
    return j.dump();
}

const MlpModel& FederationState::model_for(int client) const {
    if (!triggered) return global;
    int c = client_cluster.at(static_cast<std::size_t>(client));
    if (c < 0) throw std::logic_error("model_for: client not yet assigned to a cluster");
    return cluster_models[static_cast<std::size_t>(c)];
}

FederationState make_initial_state(const ExperimentConfig& cfg) {
    validate_config(cfg);
    FederationState st;
    st.cfg = cfg;
    st.global = MlpModel(cfg.feature_dim, cfg.latent_dim, cfg.num_classes);
    RngStream init = derive_stream(cfg.seed, stream_tag::kModelInit);
    st.global.init(init);
    st.reference = st.global;
    st.client_cluster.assign(cfg.num_clients, -1);
    st.client_descriptor.assign(cfg.num_clients, std::nullopt);
    return st;
}

void run_round(FederationState& st, const std::vector<ClientDataset>& clients, int round,
               int threads) {
    const ExperimentConfig& cfg = st.cfg;
    if (clients.size() != cfg.num_clients)
        throw std::invalid_argument("run_round: client list does not match config");
    if (round < 1 || round > cfg.rounds)
        throw std::invalid_argument("run_round: round out of range");

    RoundRecord rec;
    rec.round = round;

    RngStream part =
        derive_stream(cfg.seed, stream_tag::kParticipation, static_cast<std::uint64_t>(round));
    std::vector<int> participants;
    for (std::size_t k = 0; k < clients.size(); ++k)
        if (part.next_real() < cfg.participation_rate) participants.push_back(static_cast<int>(k));
    rec.participants = participants;

    if (participants.empty()) {
        // Nobody showed up: nothing trains, the curve holds its last value.
        rec.accuracy = st.accuracy_history.empty() ? 0.0 : st.accuracy_history.back();
        st.accuracy_history.push_back(rec.accuracy);
        rec.num_models = st.triggered ? st.clusters.num_clusters : 1;
        rec.cluster_sizes = known_cluster_sizes(st);
        st.rounds.push_back(std::move(rec));
        return;
    }

    const std::size_t n = participants.size();

    if (st.triggered) {
        // Late joiners: full descriptor against full centroids, then they train
        // with their cluster this same round.
        bool attached = false;
        for (int k : participants) {
            if (st.client_cluster[static_cast<std::size_t>(k)] != -1) continue;
            const ClientDataset& ds = clients[static_cast<std::size_t>(k)];
            Matrix lat = st.reference.latents(ds.train_view());
            std::vector<int> ytr = train_labels_of(ds);
            DescriptorVector d = make_descriptor(st, lat, &ytr, k, round);
            int c = assign_nearest_centroid(d.values, st.full_centroids);
            st.client_cluster[static_cast<std::size_t>(k)] = c;
            st.client_descriptor[static_cast<std::size_t>(k)] = std::move(d);
            attached = true;
            FLUX_FED_LOG(LogLevel::Debug, "round " << round << ": client " << k
                                          << " joined cluster " << c);
        }
        if (attached) recompute_centroids(st);
    }

    std::vector<ParamVector> trained(n);
    parallel_for(n, threads, [&](std::size_t i) {
        int k = participants[i];
        MlpModel local = st.model_for(k);
        RngStream rng = derive_stream(cfg.seed, stream_tag::kTrain,
                                      static_cast<std::uint64_t>(k),
                                      static_cast<std::uint64_t>(round));
        mlp_train_local(local, clients[static_cast<std::size_t>(k)].train_view(), cfg.train, rng);
        trained[i] = local.params();
    });

    if (!st.triggered) {
        std::vector<const ParamVector*> ptrs(n);
        std::vector<double> weights(n);
        for (std::size_t i = 0; i < n; ++i) {
            ptrs[i] = &trained[i];
            weights[i] =
                static_cast<double>(clients[static_cast<std::size_t>(participants[i])].train_count);
        }
        st.global.set_params(weighted_param_mean(ptrs, weights));
    } else {
        for (int c = 0; c < st.clusters.num_clusters; ++c) {
            std::vector<const ParamVector*> ptrs;
            std::vector<double> weights;
            for (std::size_t i = 0; i < n; ++i) {
                int k = participants[i];
                if (st.client_cluster[static_cast<std::size_t>(k)] != c) continue;
                ptrs.push_back(&trained[i]);
                weights.push_back(
                    static_cast<double>(clients[static_cast<std::size_t>(k)].train_count));
            }
            if (!ptrs.empty())
                st.cluster_models[static_cast<std::size_t>(c)].set_params(
                    weighted_param_mean(ptrs, weights));
        }
    }

    // A(r): validation accuracy of the freshly aggregated model each
    // participant now holds, weighted by validation sample count.
    std::vector<double> acc(n);
    parallel_for(n, threads, [&](std::size_t i) {
        int k = participants[i];
        acc[i] = st.model_for(k).accuracy(clients[static_cast<std::size_t>(k)].val_view());
    });
    double acc_sum = 0.0, w_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const ClientDataset& ds = clients[static_cast<std::size_t>(participants[i])];
        double w = static_cast<double>(ds.samples() - ds.train_count);
        acc_sum += w * acc[i];
        w_sum += w;
    }
    rec.accuracy = acc_sum / w_sum;
    st.accuracy_history.push_back(rec.accuracy);

    if (!st.triggered && cfg.mode != Mode::FedAvg &&
        should_trigger(st.accuracy_history, round, cfg.rounds, cfg.trigger_threshold)) {
        fire_trigger(st, clients, participants, round, threads, rec);
    }

    rec.num_models = st.triggered ? st.clusters.num_clusters : 1;
    rec.cluster_sizes = known_cluster_sizes(st);
    st.rounds.push_back(std::move(rec));
}

TestInference infer_test_clients(const FederationState& st,
                                 const std::vector<ClientDataset>& test_clients, int threads) {
    const ExperimentConfig& cfg = st.cfg;
    TestInference out;
    const std::size_t n = test_clients.size();
    out.assigned_cluster.assign(n, 0);
    out.client_accuracy.assign(n, 0.0);
    if (n == 0) return out;

    if (cfg.mode == Mode::FedAvg) {
        parallel_for(n, threads, [&](std::size_t i) {
            out.client_accuracy[i] = st.global.accuracy(test_clients[i].full_view());
        });
    } else {
        if (!st.triggered)
            throw std::logic_error("infer_test_clients: state never triggered clustering");
        parallel_for(n, threads, [&](std::size_t i) {
            const ClientDataset& ds = test_clients[i];
            Matrix lat = st.reference.latents(ds.full_view());
            // Label-free: class blocks stay zero, only the prefix is compared.
            DescriptorVector d =
                make_descriptor(st, lat, nullptr, ds.client_id, cfg.rounds + 1);
            int c = assign_nearest_centroid(prefix_of(d), st.clusters.centroids);
            out.assigned_cluster[i] = c;
            out.client_accuracy[i] =
                st.cluster_models[static_cast<std::size_t>(c)].accuracy(ds.full_view());
        });
    }

    double acc_sum = 0.0, w_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double w = static_cast<double>(test_clients[i].samples());
        acc_sum += w * out.client_accuracy[i];
        w_sum += w;
    }
    out.pooled_accuracy = acc_sum / w_sum;
    return out;
}

std::vector<int> distribution_cluster_map(const FederationState& st,
                                          const std::vector<ClientDataset>& train_clients,
                                          std::size_t num_distributions) {
    std::vector<int> map(num_distributions, 0);
    if (!st.triggered) return map;
    std::vector<std::vector<int>> votes(
        num_distributions, std::vector<int>(static_cast<std::size_t>(st.clusters.num_clusters), 0));
    for (const ClientDataset& ds : train_clients) {
        int c = st.client_cluster.at(static_cast<std::size_t>(ds.client_id));
        if (c >= 0) ++votes[static_cast<std::size_t>(ds.distribution_id)][static_cast<std::size_t>(c)];
    }
    for (std::size_t d = 0; d < num_distributions; ++d) {
        int best = 0;
        for (std::size_t c = 1; c < votes[d].size(); ++c)
            if (votes[d][c] > votes[d][static_cast<std::size_t>(best)])
                best = static_cast<int>(c);  // ties keep the lowest cluster id
        map[d] = best;
    }
    return map;
}

TestInference evaluate_known_association(const FederationState& st,
                                         const std::vector<ClientDataset>& train_clients,
                                         const std::vector<ClientDataset>& test_clients,
                                         int threads) {
    const ExperimentConfig& cfg = st.cfg;
    TestInference out;
    const std::size_t n = test_clients.size();
    out.assigned_cluster.assign(n, 0);
    out.client_accuracy.assign(n, 0.0);
    if (n == 0) return out;

    std::vector<int> map =
        distribution_cluster_map(st, train_clients, cfg.shift.num_distributions);
    parallel_for(n, threads, [&](std::size_t i) {
        const ClientDataset& ds = test_clients[i];
        int c = map.at(static_cast<std::size_t>(ds.distribution_id));
        out.assigned_cluster[i] = c;
        const MlpModel& model =
            st.triggered ? st.cluster_models[static_cast<std::size_t>(c)] : st.global;
        out.client_accuracy[i] = model.accuracy(ds.full_view());
    });

    double acc_sum = 0.0, w_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double w = static_cast<double>(test_clients[i].samples());
        acc_sum += w * out.client_accuracy[i];
        w_sum += w;
    }
    out.pooled_accuracy = acc_sum / w_sum;
    return out;
}

RunResult run_experiment(const ExperimentConfig& cfg, const std::vector<ClientDataset>& train,
                         const std::vector<ClientDataset>& test, int threads) {
    RunResult rr{make_initial_state(cfg), {}, {}, {}, 0.0};
    for (int r = 1; r <= cfg.rounds; ++r) run_round(rr.state, train, r, threads);
    rr.inferred = infer_test_clients(rr.state, test, threads);
    rr.known = evaluate_known_association(rr.state, train, test, threads);
    std::vector<int> map =
        distribution_cluster_map(rr.state, train, cfg.shift.num_distributions);
    rr.test_assignment_correct.resize(test.size());
    for (std::size_t i = 0; i < test.size(); ++i)
        rr.test_assignment_correct[i] =
            rr.inferred.assigned_cluster[i] ==
            map.at(static_cast<std::size_t>(test[i].distribution_id));
    rr.l_over_p = static_cast<double>(cfg.descriptor_length()) /
                  static_cast<double>(cfg.model_param_count());
    return rr;
}

namespace {

json params_to_json(const ParamVector& p) { return json(p); }

json descriptor_to_json(const DescriptorVector& d) {
    json j;
    j["values"] = d.values;
    j["label_free_len"] = d.label_free_len;
    j["sample_count"] = d.sample_count;
    if (d.dp_epsilon)
        j["dp_epsilon"] = *d.dp_epsilon;
    else
        j["dp_epsilon"] = nullptr;
    return j;
}

DescriptorVector descriptor_from_json(const json& j) {
    DescriptorVector d;
    d.values = j.at("values").get<std::vector<double>>();
    d.label_free_len = j.at("label_free_len").get<std::size_t>();
    d.sample_count = j.at("sample_count").get<std::size_t>();
    if (!j.at("dp_epsilon").is_null()) d.dp_epsilon = j.at("dp_epsilon").get<double>();
    return d;
}

MlpModel model_from_params(const ExperimentConfig& cfg, const ParamVector& p,
                           const char* which) {
    MlpModel m(cfg.feature_dim, cfg.latent_dim, cfg.num_classes);
    if (p.size() != m.param_count())
        throw ParseError(std::string("state: ") + which + " parameter count mismatch", 0);
    m.set_params(p);
    return m;
}

}  // namespace

void save_federation_state(const std::string& path, const FederationState& st) {
    json j;
    j["format"] = "fluxstate-v1";
    j["config"] = json::parse(config_to_json_text(st.cfg));
    j["triggered"] = st.triggered;
    j["trigger_round"] = st.trigger_round;
    j["global"] = params_to_json(st.global.params());
    j["reference"] = params_to_json(st.reference.params());
    json models = json::array();
    for (const MlpModel& m : st.cluster_models) models.push_back(params_to_json(m.params()));
    j["cluster_models"] = models;
    j["num_clusters"] = st.clusters.num_clusters;
    j["prefix_centroids"] = st.clusters.centroids;
    j["full_centroids"] = st.full_centroids;
    j["client_cluster"] = st.client_cluster;
    json descs = json::array();
    for (const auto& d : st.client_descriptor) {
        if (d)
            descs.push_back(descriptor_to_json(*d));
        else
            descs.push_back(nullptr);
    }
    j["client_descriptor"] = descs;
    j["bounds_lo"] = st.bounds.lo;
    j["bounds_hi"] = st.bounds.hi;
    j["pca_ready"] = st.pca_ready;
    if (st.pca_ready) {
        j["pca_mean"] = st.pca.mean;
        j["pca_rows"] = st.pca.components.rows;
        j["pca_cols"] = st.pca.components.cols;
        j["pca_components"] = st.pca.components.data;
    }
    j["accuracy_history"] = st.accuracy_history;

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("state: cannot open " + path + " for writing");
    out << j.dump(2) << "\n";
    if (!out) throw ConfigError("state: write failed for " + path);
}

FederationState load_federation_state(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("state: cannot open " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("state: ") + e.what(), e.byte);
    }
    try {
        if (j.at("format").get<std::string>() != "fluxstate-v1")
            throw ParseError("state: unknown format tag", 0);
        ExperimentConfig cfg = config_from_json_text(j.at("config").dump());
        FederationState st;
        st.cfg = cfg;
        st.triggered = j.at("triggered").get<bool>();
        st.trigger_round = j.at("trigger_round").get<int>();
        st.global = model_from_params(cfg, j.at("global").get<ParamVector>(), "global");
        st.reference = model_from_params(cfg, j.at("reference").get<ParamVector>(), "reference");
        for (const json& m : j.at("cluster_models"))
            st.cluster_models.push_back(model_from_params(cfg, m.get<ParamVector>(), "cluster"));
        st.clusters.num_clusters = j.at("num_clusters").get<int>();
        st.clusters.centroids = j.at("prefix_centroids").get<std::vector<std::vector<double>>>();
        st.full_centroids = j.at("full_centroids").get<std::vector<std::vector<double>>>();
        st.client_cluster = j.at("client_cluster").get<std::vector<int>>();
        if (st.client_cluster.size() != cfg.num_clients)
            throw ParseError("state: client_cluster length mismatch", 0);
        for (const json& d : j.at("client_descriptor")) {
            if (d.is_null())
                st.client_descriptor.emplace_back(std::nullopt);
            else
                st.client_descriptor.emplace_back(descriptor_from_json(d));
        }
        if (st.client_descriptor.size() != cfg.num_clients)
            throw ParseError("state: client_descriptor length mismatch", 0);
        st.bounds.lo = j.at("bounds_lo").get<std::vector<double>>();
        st.bounds.hi = j.at("bounds_hi").get<std::vector<double>>();
        st.pca_ready = j.at("pca_ready").get<bool>();
        if (st.pca_ready) {
            st.pca.mean = j.at("pca_mean").get<std::vector<double>>();
            st.pca.components.rows = j.at("pca_rows").get<std::size_t>();
            st.pca.components.cols = j.at("pca_cols").get<std::size_t>();
            st.pca.components.data = j.at("pca_components").get<std::vector<double>>();
            if (st.pca.components.data.size() !=
                st.pca.components.rows * st.pca.components.cols)
                throw ParseError("state: projection size mismatch", 0);
        }
        st.accuracy_history = j.at("accuracy_history").get<std::vector<double>>();
        if (st.triggered &&
            st.cluster_models.size() != static_cast<std::size_t>(st.clusters.num_clusters))
            throw ParseError("state: cluster model count mismatch", 0);
        return st;
    } catch (const json::exception& e) {
        throw ParseError(std::string("state: ") + e.what(), 0);
    }
}

}  // namespace fluxfed
