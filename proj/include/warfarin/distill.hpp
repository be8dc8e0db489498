#pragma once

#include <string>
#include <vector>

#include "warfarin/ppo.hpp"

namespace warfarin {

struct DistillSample {
  double inr = 0.0;
  int action_index = -1;
  double percent_change = 0.0;
};

using DistillDataset = std::vector<DistillSample>;

// Roll the teacher checkpoint (deterministic argmax policy) over a cohort and
// record (measured INR, chosen action) at every maintenance decision.
DistillDataset collect_distill_dataset(const PolicyCheckpoint& teacher,
                                       const std::vector<Patient>& cohort,
                                       const PkPdParams& params, const RewardConfig& reward,
                                       const TrialConfig& trial, std::uint64_t seed);

struct TreeNode {
  bool is_leaf = true;
  double threshold = 0.0;  // internal nodes: inr <= threshold goes left
  int left = -1;
  int right = -1;
  int action_index = -1;  // leaf label
  int samples = 0;
};

// Single-feature CART classifier over INR with Gini impurity. Split
// thresholds sit at midpoints between consecutive distinct INR values; equal
// impurity decreases resolve toward the smaller threshold.
class DecisionTree {
 public:
  static DecisionTree fit(const DistillDataset& data, int max_depth, int min_samples_leaf);
  int predict(double inr) const;
  const std::vector<TreeNode>& nodes() const { return nodes_; }
  int leaf_count() const;
  int depth() const;

 private:
  std::vector<TreeNode> nodes_;
};

// Flatten the tree's leaves, in INR order, into a protocol table over
// (0, inf), merging adjacent intervals that prescribe the same action.
ProtocolTable tree_to_table(const DecisionTree& tree, const ActionSpace& actions,
                            const std::string& name);

// Fraction of probe INRs (uniform in [inr_low, inr_high]) where the table and
// the tree prescribe the same dose change.
double table_tree_agreement(const ProtocolTable& table, const DecisionTree& tree,
                            const ActionSpace& actions, int n_points, RandomStream& rng,
                            double inr_low = 0.5, double inr_high = 6.0);

// Fraction of dataset rows where the table reproduces the teacher's action.
double dataset_fidelity(const ProtocolTable& table, const DistillDataset& data,
                        const ActionSpace& actions);

struct DistillReport {
  std::string teacher_config_hash;
  std::uint64_t dataset_seed = 0;
  int dataset_size = 0;
  int tree_leaves = 0;
  int table_rows = 0;
  double teacher_agreement = 0.0;
  double tree_table_agreement = 0.0;
};

// Human-readable one-page dosing card for the distilled table.
std::string protocol_card_markdown(const ProtocolTable& table, const DistillReport& report);

}  // namespace warfarin
