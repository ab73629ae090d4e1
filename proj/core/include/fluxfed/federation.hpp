#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fluxfed/clustering.hpp"
#include "fluxfed/config.hpp"
#include "fluxfed/dataset.hpp"
#include "fluxfed/descriptor.hpp"
#include "fluxfed/mlp.hpp"

namespace fluxfed {

// A(r) < T test with a floor of three observed rounds and a hard ceiling at
// 80% of the budget (5r >= 4R in integers, so no float edge at e.g. R = 5).
bool should_trigger(const std::vector<double>& accuracy_history, int round, int total_rounds,
                    double threshold);

struct RoundRecord {
    int round = 0;
    std::vector<int> participants;
    std::vector<std::size_t> cluster_sizes;  // known members per cluster; empty pre-trigger
    double accuracy = 0.0;
    bool triggered = false;                  // true only on the round that fired
    std::optional<double> dbscan_epsilon;    // set only when the trigger used the elbow rule
    int num_models = 1;
};

std::string round_record_to_json_line(const RoundRecord& rec);

struct FederationState {
    ExperimentConfig cfg;
    MlpModel global;                  // single shared model until the trigger fires
    MlpModel reference;               // frozen post-aggregation snapshot used for descriptors
    std::vector<MlpModel> cluster_models;
    bool triggered = false;
    int trigger_round = -1;

    ClusterState clusters;            // centroids here are label-free prefixes
    std::vector<std::vector<double>> full_centroids;
    std::vector<int> client_cluster;  // -1 until a client has been assigned
    std::vector<std::optional<DescriptorVector>> client_descriptor;

    AlignmentBounds bounds;
    PcaMap pca;
    bool pca_ready = false;

    std::vector<double> accuracy_history;
    std::vector<RoundRecord> rounds;

    // Model that client k currently trains from / is evaluated with.
    const MlpModel& model_for(int client) const;
};

FederationState make_initial_state(const ExperimentConfig& cfg);

// One communication round: participant sampling, local training, aggregation,
// weighted validation accuracy, then (once) the trigger + clustering step.
// Results are byte-identical for any thread count >= 1.
void run_round(FederationState& state, const std::vector<ClientDataset>& clients, int round,
               int threads);

struct TestInference {
    std::vector<int> assigned_cluster;       // per test client
    std::vector<double> client_accuracy;     // cluster model scored on all samples
    double pooled_accuracy = 0.0;            // sample-weighted over all test clients
};

// Assigns unseen clients by the label-free descriptor prefix against prefix
// centroids. Requires a triggered state (or FedAvg mode, where everything
// maps to the single model).
TestInference infer_test_clients(const FederationState& state,
                                 const std::vector<ClientDataset>& test_clients, int threads);

// Ground-truth routing: each test client is scored with the model of the
// cluster that the majority of its distribution's training clients joined.
// Ties and unassigned distributions fall back to the lowest cluster id.
TestInference evaluate_known_association(const FederationState& state,
                                         const std::vector<ClientDataset>& train_clients,
                                         const std::vector<ClientDataset>& test_clients,
                                         int threads);

// Majority cluster per distribution id, from training clients' assignments.
std::vector<int> distribution_cluster_map(const FederationState& state,
                                          const std::vector<ClientDataset>& train_clients,
                                          std::size_t num_distributions);

struct RunResult {
    FederationState state;
    TestInference inferred;        // descriptor-routed test clients
    TestInference known;           // ground-truth-routed test clients
    std::vector<bool> test_assignment_correct;
    double l_over_p = 0.0;
};

RunResult run_experiment(const ExperimentConfig& cfg, const std::vector<ClientDataset>& train,
                         const std::vector<ClientDataset>& test, int threads);

// Full state round-trip so `eval` can run on a previously trained state.
void save_federation_state(const std::string& path, const FederationState& state);
FederationState load_federation_state(const std::string& path);

}  // namespace fluxfed
