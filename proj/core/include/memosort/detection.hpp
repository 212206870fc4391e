#pragma once

#include "memosort/geometry.hpp"

namespace memosort {

// One detector output: a box, its confidence score, and its frame index.
struct Detection {
  BBox box;
  double score;
  int frame;
};

// One row of tracking output or ground truth: a box with an identity.
struct TrackedBox {
  int frame;
  int id;
  BBox box;
};

}  // namespace memosort
