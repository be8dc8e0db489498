#include "warfarin/distill.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

namespace warfarin {

DistillDataset collect_distill_dataset(const PolicyCheckpoint& teacher,
                                       const std::vector<Patient>& cohort,
                                       const PkPdParams& params, const RewardConfig& reward,
                                       const TrialConfig& trial, std::uint64_t seed) {
  auto shared = std::make_shared<const PolicyCheckpoint>(teacher);
  NeuralDosingPolicy policy(shared);
  RandomStream master(seed);
  DistillDataset data;
  for (const Patient& p : cohort) {
    DosingEnv env(p, params, reward, teacher.actions, trial,
                  master.child("measurement", static_cast<std::uint64_t>(p.id)));
    Trajectory t = run_episode(env, policy);
    for (const DecisionRecord& rec : t.decisions) {
      if (rec.action_index < 0) continue;
      data.push_back({rec.obs.inr_current, rec.action_index, rec.percent_change});
    }
  }
  if (data.empty()) throw DomainError("distill: empty dataset");
  return data;
}

namespace {

struct SortedData {
  std::vector<double> x;
  std::vector<int> y;
  int n_classes = 0;
};

double gini(const std::vector<int>& counts, int total) {
  if (total == 0) return 0.0;
  double sum_sq = 0.0;
  for (int c : counts) {
    double f = static_cast<double>(c) / total;
    sum_sq += f * f;
  }
  return 1.0 - sum_sq;
}

struct Builder {
  const SortedData& data;
  int max_depth;
  int min_leaf;
  std::vector<TreeNode> nodes;

  int majority(int begin, int end) const {
    std::vector<int> counts(data.n_classes, 0);
    for (int i = begin; i < end; ++i) ++counts[data.y[i]];
    int best = 0;
    for (int c = 1; c < data.n_classes; ++c)
      if (counts[c] > counts[best]) best = c;
    return best;
  }

  // Returns node index for the range [begin, end).
  int build(int begin, int end, int depth) {
    const int n = end - begin;
    const int node_index = static_cast<int>(nodes.size());
    nodes.push_back(TreeNode{});
    nodes[node_index].samples = n;

    std::vector<int> total_counts(data.n_classes, 0);
    for (int i = begin; i < end; ++i) ++total_counts[data.y[i]];
    const double parent_impurity = gini(total_counts, n);

    bool can_split = depth < max_depth && n >= 2 * min_leaf && parent_impurity > 0.0;
    double best_score = std::numeric_limits<double>::infinity();
    double best_threshold = 0.0;
    int best_pos = -1;

    if (can_split) {
      std::vector<int> left_counts(data.n_classes, 0);
      int left_n = 0;
      for (int i = begin; i < end - 1; ++i) {
        ++left_counts[data.y[i]];
        ++left_n;
        if (data.x[i] == data.x[i + 1]) continue;  // threshold must separate values
        const int right_n = n - left_n;
        if (left_n < min_leaf || right_n < min_leaf) continue;
        std::vector<int> right_counts(data.n_classes);
        for (int c = 0; c < data.n_classes; ++c) right_counts[c] = total_counts[c] - left_counts[c];
        const double score = (left_n * gini(left_counts, left_n) +
                              right_n * gini(right_counts, right_n)) /
                             n;
        // Strictly-better keeps the first (smallest) threshold on ties.
        if (score < best_score - 1e-15) {
          best_score = score;
          best_threshold = 0.5 * (data.x[i] + data.x[i + 1]);
          best_pos = i + 1;
        }
      }
    }

    if (best_pos < 0 || best_score >= parent_impurity - 1e-12) {
      nodes[node_index].is_leaf = true;
      nodes[node_index].action_index = majority(begin, end);
      return node_index;
    }

    nodes[node_index].is_leaf = false;
    nodes[node_index].threshold = best_threshold;
    int left = build(begin, begin + (best_pos - begin), depth + 1);
    int right = build(best_pos, end, depth + 1);
    nodes[node_index].left = left;
    nodes[node_index].right = right;
    return node_index;
  }
};

}  // namespace

DecisionTree DecisionTree::fit(const DistillDataset& raw, int max_depth, int min_samples_leaf) {
  if (raw.empty()) throw DomainError("tree fit: empty dataset");
  if (max_depth < 1 || min_samples_leaf < 1)
    throw DomainError("tree fit: depth and leaf size must be positive");
  std::vector<int> order(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&raw](int a, int b) {
    if (raw[a].inr != raw[b].inr) return raw[a].inr < raw[b].inr;
    return raw[a].action_index < raw[b].action_index;
  });
  SortedData data;
  data.x.reserve(raw.size());
  data.y.reserve(raw.size());
  int n_classes = 0;
  for (int idx : order) {
    data.x.push_back(raw[idx].inr);
    data.y.push_back(raw[idx].action_index);
    n_classes = std::max(n_classes, raw[idx].action_index + 1);
  }
  data.n_classes = n_classes;

  Builder b{data, max_depth, min_samples_leaf, {}};
  b.build(0, static_cast<int>(data.x.size()), 0);
  DecisionTree tree;
  tree.nodes_ = std::move(b.nodes);
  return tree;
}

int DecisionTree::predict(double inr) const {
  if (nodes_.empty()) throw DomainError("tree predict: empty tree");
  int i = 0;
  while (!nodes_[i].is_leaf) i = inr <= nodes_[i].threshold ? nodes_[i].left : nodes_[i].right;
  return nodes_[i].action_index;
}

int DecisionTree::leaf_count() const {
  int n = 0;
  for (const TreeNode& node : nodes_)
    if (node.is_leaf) ++n;
  return n;
}

int DecisionTree::depth() const {
  // Depth of node 0 is 0; children were appended after their parent, so a
  // simple recursive walk suffices.
  struct Walker {
    const std::vector<TreeNode>& nodes;
    int walk(int i) const {
      if (nodes[i].is_leaf) return 0;
      return 1 + std::max(walk(nodes[i].left), walk(nodes[i].right));
    }
  };
  if (nodes_.empty()) return 0;
  return Walker{nodes_}.walk(0);
}

ProtocolTable tree_to_table(const DecisionTree& tree, const ActionSpace& actions,
                            const std::string& name) {
  struct Interval {
    double low, high;
    int action;
  };
  std::vector<Interval> intervals;
  struct Walker {
    const std::vector<TreeNode>& nodes;
    std::vector<Interval>& out;
    void walk(int i, double low, double high) const {
      const TreeNode& node = nodes[i];
      if (node.is_leaf) {
        out.push_back({low, high, node.action_index});
        return;
      }
      walk(node.left, low, node.threshold);
      walk(node.right, node.threshold, high);
    }
  };
  Walker{tree.nodes(), intervals}.walk(0, 0.0, std::numeric_limits<double>::infinity());

  std::vector<ProtocolRow> rows;
  for (const Interval& iv : intervals) {
    if (iv.action < 0 || iv.action >= actions.size())
      throw DomainError("tree_to_table: leaf action outside the action grid");
    if (!rows.empty() && rows.back().percent_change == actions.percent_changes[iv.action]) {
      rows.back().inr_high = iv.high;  // merge equal-action neighbours
      continue;
    }
    ProtocolRow r;
    r.inr_low = iv.low;
    r.inr_high = iv.high;
    r.percent_change = actions.percent_changes[iv.action];
    r.one_time = OneTimeAction::kNone;
    rows.push_back(r);
  }
  return ProtocolTable::from_rows(std::move(rows), name);
}

double table_tree_agreement(const ProtocolTable& table, const DecisionTree& tree,
                            const ActionSpace& actions, int n_points, RandomStream& rng,
                            double inr_low, double inr_high) {
  if (n_points < 1) throw DomainError("table_tree_agreement: need at least one probe");
  int agree = 0;
  for (int i = 0; i < n_points; ++i) {
    double inr = rng.uniform(inr_low, inr_high);
    double table_pct = table.row_for(inr).percent_change;
    double tree_pct = actions.percent_changes[tree.predict(inr)];
    if (table_pct == tree_pct) ++agree;
  }
  return static_cast<double>(agree) / n_points;
}

double dataset_fidelity(const ProtocolTable& table, const DistillDataset& data,
                        const ActionSpace& actions) {
  if (data.empty()) throw DomainError("dataset_fidelity: empty dataset");
  int agree = 0;
  for (const DistillSample& s : data) {
    double table_pct = table.row_for(s.inr).percent_change;
    if (table_pct == actions.percent_changes[s.action_index]) ++agree;
  }
  return static_cast<double>(agree) / static_cast<double>(data.size());
}

std::string protocol_card_markdown(const ProtocolTable& table, const DistillReport& report) {
  std::ostringstream out;
  out << "# Distilled maintenance dosing table\n\n";
  out << "One-feature dosing rule extracted from the trained policy: look up the\n";
  out << "current INR, scale the previous weekly maintenance dose by the listed\n";
  out << "percentage, and re-check at the next visit.\n\n";
  out << "| INR range | dose change |\n";
  out << "|---|---|\n";
  char buf[64];
  auto fmt = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return std::string(buf);
  };
  for (const ProtocolRow& r : table.rows()) {
    std::string range;
    if (std::isinf(r.inr_high))
      range = "> " + fmt(r.inr_low);
    else if (r.inr_low == 0.0)
      range = "<= " + fmt(r.inr_high);
    else
      range = fmt(r.inr_low) + " - " + fmt(r.inr_high);
    int pct = static_cast<int>(std::lround(r.percent_change * 100.0));
    std::string change = pct == 0 ? std::string("hold") : (pct > 0 ? "+" : "") +
                                                              std::to_string(pct) + "%";
    out << "| " << range << " | " << change << " |\n";
  }
  out << "\n";
  out << "- teacher config hash: `" << report.teacher_config_hash << "`\n";
  out << "- dataset: " << report.dataset_size << " decisions (seed " << report.dataset_seed
      << ")\n";
  out << "- tree leaves: " << report.tree_leaves << ", table rows: " << report.table_rows << "\n";
  char agree[64];
  std::snprintf(agree, sizeof(agree), "%.4f / %.4f", report.teacher_agreement,
                report.tree_table_agreement);
  out << "- fidelity to teacher / tree-table agreement: " << agree << "\n";
  return out.str();
}

}  // namespace warfarin
