/*
 * Copyright 2026 The pacstab Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "pacstab/treenet.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "pacstab/error.hpp"
#include "pacstab/parallel.hpp"

namespace pacstab {
namespace {

std::size_t AddBalanced(TreeSpec& tree, std::vector<std::uint16_t> classes) {
  const std::size_t index = tree.nodes.size();
  tree.nodes.push_back({classes, {}, {}, {}});
  if (classes.size() > 1) {
    const std::size_t half = (classes.size() + 1) / 2;
    std::vector<std::uint16_t> lo(classes.begin(), classes.begin() + half);
    std::vector<std::uint16_t> hi(classes.begin() + half, classes.end());
    const std::size_t l = AddBalanced(tree, std::move(lo));
    tree.nodes[index].left = l;
    const std::size_t r = AddBalanced(tree, std::move(hi));
    tree.nodes[index].right = r;
  }
  return index;
}

class SkeletonParser {
 public:
  SkeletonParser(std::string_view text, TreeSpec& tree) : text_(text), tree_(tree) {}

  void ParseRoot() {
    ParseNode();
    SkipSpace();
    if (pos_ != text_.size()) Fail("unexpected trailing text");
  }

 private:
  [[noreturn]] void Fail(const std::string& what) const {
    throw InvalidArgument("tree skeleton: " + what + " at position " +
                          std::to_string(pos_));
  }

  void SkipSpace() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      ++pos_;
    }
  }

  void Expect(char ch) {
    SkipSpace();
    if (pos_ >= text_.size() || text_[pos_] != ch) Fail(std::string("expected '") + ch + "'");
    ++pos_;
  }

  std::uint16_t ParseInt() {
    SkipSpace();
    const std::size_t start = pos_;
    unsigned long value = 0;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
      value = value * 10 + static_cast<unsigned long>(text_[pos_] - '0');
      if (value > 65535) Fail("class id too large");
      ++pos_;
    }
    if (pos_ == start) Fail("expected a class id");
    return static_cast<std::uint16_t>(value);
  }

  std::size_t ParseNode() {
    SkipSpace();
    if (pos_ >= text_.size()) Fail("unexpected end of expression");
    const char ch = text_[pos_];
    if (ch == '(') {
      ++pos_;
      const std::size_t index = tree_.nodes.size();
      tree_.nodes.emplace_back();
      const std::size_t l = ParseNode();
      Expect(',');
      const std::size_t r = ParseNode();
      Expect(')');
      TreeNode& node = tree_.nodes[index];
      node.left = l;
      node.right = r;
      std::vector<std::uint16_t> merged = tree_.nodes[l].classes;
      merged.insert(merged.end(), tree_.nodes[r].classes.begin(),
                    tree_.nodes[r].classes.end());
      std::sort(merged.begin(), merged.end());
      node.classes = std::move(merged);
      return index;
    }
    if (ch == '{') {
      ++pos_;
      std::vector<std::uint16_t> classes{ParseInt()};
      SkipSpace();
      while (pos_ < text_.size() && text_[pos_] == ',') {
        ++pos_;
        classes.push_back(ParseInt());
        SkipSpace();
      }
      Expect('}');
      std::sort(classes.begin(), classes.end());
      return AddBalanced(tree_, std::move(classes));
    }
    const std::size_t index = tree_.nodes.size();
    tree_.nodes.push_back({{ParseInt()}, {}, {}, {}});
    return index;
  }

  std::string_view text_;
  TreeSpec& tree_;
  std::size_t pos_ = 0;
};

}  // namespace

std::size_t TreeSpec::InternalCount() const {
  return static_cast<std::size_t>(std::count_if(
      nodes.begin(), nodes.end(), [](const TreeNode& n) { return !n.is_leaf(); }));
}

std::size_t TreeSpec::Depth() const {
  std::function<std::size_t(std::size_t)> depth = [&](std::size_t i) -> std::size_t {
    const TreeNode& node = nodes[i];
    if (node.is_leaf()) return 0;
    return 1 + std::max(depth(*node.left), depth(*node.right));
  };
  return nodes.empty() ? 0 : depth(0);
}

void TreeSpec::Validate() const {
  if (n_classes < 2) throw InvalidArgument("tree needs at least 2 classes");
  if (nodes.empty()) throw InvalidArgument("tree has no nodes");
  std::vector<std::uint16_t> all(n_classes);
  std::iota(all.begin(), all.end(), std::uint16_t{0});
  if (nodes[0].classes != all) {
    throw InvalidArgument("root class-set must be every class in [0, " +
                          std::to_string(n_classes) + ")");
  }
  std::vector<int> leaf_count(n_classes, 0);
  std::vector<bool> seen(nodes.size(), false);
  std::function<void(std::size_t)> visit = [&](std::size_t i) {
    if (i >= nodes.size()) throw InvalidArgument("child index out of range");
    if (seen[i]) throw InvalidArgument("node " + std::to_string(i) + " reached twice");
    seen[i] = true;
    const TreeNode& node = nodes[i];
    if (!std::is_sorted(node.classes.begin(), node.classes.end())) {
      throw InvalidArgument("node " + std::to_string(i) + " class-set is not sorted");
    }
    if (node.left.has_value() != node.right.has_value()) {
      throw InvalidArgument("node " + std::to_string(i) + " has exactly one child");
    }
    if (node.is_leaf()) {
      if (node.classes.size() != 1) {
        throw InvalidArgument("leaf " + std::to_string(i) + " must hold one class");
      }
      if (node.classes[0] >= n_classes) {
        throw InvalidArgument("leaf " + std::to_string(i) + " class out of range");
      }
      ++leaf_count[node.classes[0]];
      return;
    }
    if (*node.left >= nodes.size() || *node.right >= nodes.size()) {
      throw InvalidArgument("node " + std::to_string(i) + " child index out of range");
    }
    const auto& l = nodes[*node.left].classes;
    const auto& r = nodes[*node.right].classes;
    std::vector<std::uint16_t> merged;
    std::set_union(l.begin(), l.end(), r.begin(), r.end(), std::back_inserter(merged));
    std::vector<std::uint16_t> common;
    std::set_intersection(l.begin(), l.end(), r.begin(), r.end(),
                          std::back_inserter(common));
    if (!common.empty()) {
      throw InvalidArgument("node " + std::to_string(i) +
                            " children have overlapping class-sets");
    }
    if (l.empty() || r.empty() || merged != node.classes) {
      throw InvalidArgument("node " + std::to_string(i) +
                            " children do not partition its class-set");
    }
    visit(*node.left);
    visit(*node.right);
  };
  visit(0);
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
    throw InvalidArgument("tree has unreachable nodes");
  }
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (leaf_count[c] != 1) {
      throw InvalidArgument("class " + std::to_string(c) +
                            " must appear in exactly one leaf");
    }
  }
}

TreeSpec BalancedSkeleton(std::size_t n_classes) {
  if (n_classes < 2 || n_classes > 65536) {
    throw InvalidArgument("balanced skeleton needs 2..65536 classes");
  }
  TreeSpec tree;
  tree.n_classes = n_classes;
  std::vector<std::uint16_t> all(n_classes);
  std::iota(all.begin(), all.end(), std::uint16_t{0});
  AddBalanced(tree, std::move(all));
  return tree;
}

TreeSpec Cifar10Skeleton() { return ParseSkeleton("({0,1,8,9},{2,3,4,5,6,7})", 10); }

TreeSpec ParseSkeleton(std::string_view text, std::size_t n_classes) {
  TreeSpec tree;
  tree.n_classes = n_classes;
  SkeletonParser(text, tree).ParseRoot();
  tree.Validate();
  return tree;
}

std::string SkeletonToString(const TreeSpec& tree) {
  std::function<std::string(std::size_t)> render = [&](std::size_t i) {
    const TreeNode& node = tree.nodes[i];
    if (node.is_leaf()) return std::to_string(node.classes[0]);
    return "(" + render(*node.left) + "," + render(*node.right) + ")";
  };
  return tree.nodes.empty() ? std::string() : render(0);
}

FeatureDataset NodeDataset(const TreeSpec& tree, std::size_t node_index,
                           const FeatureDataset& ds) {
  if (node_index >= tree.nodes.size()) throw InvalidArgument("node index out of range");
  const TreeNode& node = tree.nodes[node_index];
  if (node.is_leaf()) {
    throw InvalidArgument("node " + std::to_string(node_index) + " is a leaf");
  }
  if (ds.n_classes() != tree.n_classes) {
    throw DimensionMismatch("dataset class count does not match the tree");
  }
  const auto& left = tree.nodes[*node.left].classes;
  std::vector<std::uint16_t> mapping(ds.n_classes(), 0);
  std::vector<bool> member(ds.n_classes(), false);
  for (std::uint16_t c : node.classes) {
    member[c] = true;
    mapping[c] = std::binary_search(left.begin(), left.end(), c) ? 0 : 1;
  }
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < ds.n_samples(); ++i) {
    if (member[ds.label(i)]) rows.push_back(i);
  }
  if (rows.empty()) {
    throw InvalidArgument("tree node " + std::to_string(node_index) +
                          " has no training samples for its class-set");
  }
  return ds.SelectRows(rows).Relabel(mapping, 2);
}

TreeSpec TrainTree(const TreeSpec& skeleton, const FeatureDataset& ds,
                   LossKind kind, const TrainingConfig& config,
                   std::size_t workers) {
  skeleton.Validate();
  if (config.freeze_mask) {
    throw InvalidArgument("freeze masks are not supported for tree nodes");
  }
  TreeSpec tree = skeleton;
  std::vector<std::size_t> internal;
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    if (!tree.nodes[i].is_leaf()) internal.push_back(i);
  }
  // Build all node datasets first so a missing class fails before training.
  std::vector<FeatureDataset> sets;
  sets.reserve(internal.size());
  for (std::size_t i : internal) sets.push_back(NodeDataset(tree, i, ds));

  const ParamVector p0(ParamLayout{ds.feature_dim(), 2});
  std::vector<ParamVector> trained(internal.size());
  ParallelFor(internal.size(), workers, [&](std::size_t k) {
    trained[k] = Train(p0, sets[k], nullptr, kind, config).params;
  });
  for (std::size_t k = 0; k < internal.size(); ++k) {
    tree.nodes[internal[k]].classifier = std::move(trained[k]);
  }
  return tree;
}

std::size_t TreePredict(const TreeSpec& tree, std::span<const float> x) {
  std::size_t index = 0;
  for (;;) {
    const TreeNode& node = tree.nodes.at(index);
    if (node.is_leaf()) return node.classes[0];
    if (!node.classifier) {
      throw InvalidArgument("tree node " + std::to_string(index) + " is untrained");
    }
    const auto scores = Predict(*node.classifier, x);
    index = scores[0] >= scores[1] ? *node.left : *node.right;
  }
}

double TreeAccuracy(const TreeSpec& tree, const FeatureDataset& ds) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ds.n_samples(); ++i) {
    if (TreePredict(tree, ds.row(i)) == ds.label(i)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(ds.n_samples());
}

void SaveTree(const TreeSpec& tree, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const TreeNode& node = tree.nodes[i];
    nlohmann::ordered_json j = {{"id", i}, {"classes", node.classes}};
    if (!node.is_leaf()) {
      j["left"] = *node.left;
      j["right"] = *node.right;
      if (node.classifier) {
        const std::string file = "node_" + std::to_string(i) + ".pvc";
        SaveParamVector(*node.classifier, dir / file);
        j["model"] = file;
      }
    }
    nodes.push_back(std::move(j));
  }
  const nlohmann::ordered_json doc = {
      {"format", "pacstab-tree-1"},
      {"n_classes", tree.n_classes},
      {"skeleton", SkeletonToString(tree)},
      {"nodes", nodes},
  };
  std::ofstream out(dir / "tree.json");
  if (!out) throw Error("cannot write " + (dir / "tree.json").string());
  out << doc.dump(2) << '\n';
}

TreeSpec LoadTree(const std::filesystem::path& dir) {
  std::ifstream in(dir / "tree.json");
  if (!in) throw Error("cannot open " + (dir / "tree.json").string());
  TreeSpec tree;
  try {
    const nlohmann::json doc = nlohmann::json::parse(in);
    tree.n_classes = doc.at("n_classes").get<std::size_t>();
    for (const auto& j : doc.at("nodes")) {
      TreeNode node;
      node.classes = j.at("classes").get<std::vector<std::uint16_t>>();
      if (j.contains("left")) node.left = j.at("left").get<std::size_t>();
      if (j.contains("right")) node.right = j.at("right").get<std::size_t>();
      if (j.contains("model")) {
        node.classifier = LoadParamVector(dir / j.at("model").get<std::string>());
      }
      tree.nodes.push_back(std::move(node));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed tree.json: ") + e.what());
  }
  tree.Validate();
  return tree;
}

}  // namespace pacstab
