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

// Multiclass prediction by a binary decision tree of linear classifiers.
//
// Each internal node owns a two-class model that routes a sample to its left
// (model class 0) or right (model class 1) child; leaves name a single class.

#ifndef PACSTAB_TREENET_HPP_
#define PACSTAB_TREENET_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pacstab/dataset.hpp"
#include "pacstab/model.hpp"
#include "pacstab/trainer.hpp"

namespace pacstab {

struct TreeNode {
  std::vector<std::uint16_t> classes;  // ascending
  std::optional<std::size_t> left;
  std::optional<std::size_t> right;
  std::optional<ParamVector> classifier;

  bool is_leaf() const { return !left.has_value(); }
};

// Nodes are stored in pre-order; node 0 is the root.
struct TreeSpec {
  std::size_t n_classes = 0;
  std::vector<TreeNode> nodes;

  std::size_t InternalCount() const;
  std::size_t Depth() const;
  // Throws InvalidArgument if children do not partition their parent, a class
  // is missing from the leaves, or the root does not cover [0, n_classes).
  void Validate() const;
};

// Splits every set into halves in class-id order, the left half taking the
// extra class when the size is odd.
TreeSpec BalancedSkeleton(std::size_t n_classes);

// Ten-class layout: the root separates {airplane, automobile, ship, truck}
// = {0, 1, 8, 9} from the six animal classes; lower levels are balanced.
TreeSpec Cifar10Skeleton();

// Skeleton from a split expression:
//   node := INT | '(' node ',' node ')' | '{' INT (',' INT)* '}'
// where '{...}' expands to a balanced subtree over the listed classes.
// Example: "({0,1,8,9},{2,3,4,5,6,7})" is Cifar10Skeleton().
TreeSpec ParseSkeleton(std::string_view text, std::size_t n_classes);

std::string SkeletonToString(const TreeSpec& tree);

// Rows of `ds` whose label belongs to `node`, relabelled 0 (left subtree) or
// 1 (right subtree). Throws if the node is a leaf or no row matches.
FeatureDataset NodeDataset(const TreeSpec& tree, std::size_t node,
                           const FeatureDataset& ds);

// Trains every internal node with the deterministic trainer, starting each
// node model from zeros. Independent nodes run on up to `workers` threads.
TreeSpec TrainTree(const TreeSpec& skeleton, const FeatureDataset& ds,
                   LossKind kind, const TrainingConfig& config,
                   std::size_t workers = 1);

// Descends from the root; routes left when score[0] >= score[1].
std::size_t TreePredict(const TreeSpec& tree, std::span<const float> x);

double TreeAccuracy(const TreeSpec& tree, const FeatureDataset& ds);

// Writes `tree.json` and one `node_<i>.pvc` per trained node into `dir`.
void SaveTree(const TreeSpec& tree, const std::filesystem::path& dir);
TreeSpec LoadTree(const std::filesystem::path& dir);

}  // namespace pacstab

#endif  // PACSTAB_TREENET_HPP_
