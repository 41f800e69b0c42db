// Copyright 2026 The rsseg Authors.
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

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "rsseg/core.hpp"
#include "rsseg/rle.hpp"

namespace rsseg {

/// One call to a mask-proposal generator: a tile, prompt points in tile
/// coordinates, and the score floors the generator must apply itself.
struct ProposalRequest {
  RgbImage tile;
  std::vector<Point> points;
  double tau_iou = 1.0;
  double tau_stab = 1.0;

  void validate() const {
    if (tile.width() == 0 || tile.height() == 0) {
      throw std::invalid_argument("ProposalRequest: empty tile");
    }
    if (!(tau_iou >= 0.0 && tau_iou <= 1.0) || !(tau_stab >= 0.0 && tau_stab <= 1.0)) {
      throw std::invalid_argument("ProposalRequest: thresholds must lie in [0, 1]");
    }
    for (const Point& p : points) {
      if (p.x >= tile.width() || p.y >= tile.height()) {
        throw std::invalid_argument("ProposalRequest: prompt point outside tile");
      }
    }
  }
};

/// A candidate mask in tile coordinates. Backends only return proposals whose
/// scores clear the request's thresholds.
struct MaskProposal {
  BinaryMask mask;
  double pred_iou = 0.0;
  double stability = 0.0;
};

/// Generator state bound to one tile window. The multipass engine issues its
/// calls for a tile sequentially through one session.
class ProposalSession {
 public:
  virtual ~ProposalSession() = default;
  virtual std::vector<MaskProposal> generate(const ProposalRequest& request) = 0;
};

/// Factory for per-tile sessions. open_session() may be called concurrently
/// for distinct windows; `window` is the tile's position in the source raster.
class ProposalBackend {
 public:
  virtual ~ProposalBackend() = default;
  virtual std::unique_ptr<ProposalSession> open_session(const Rect& window) = 0;
};

/// Throws BackendError unless every proposal is tile-sized and clears the
/// request thresholds.
inline void check_proposals(const ProposalRequest& request,
                            const std::vector<MaskProposal>& proposals) {
  for (const MaskProposal& p : proposals) {
    if (p.mask.width() != request.tile.width() || p.mask.height() != request.tile.height()) {
      throw BackendError("backend returned a mask whose size differs from the tile");
    }
    if (p.pred_iou < request.tau_iou || p.stability < request.tau_stab) {
      throw BackendError("backend returned a mask below the requested thresholds");
    }
  }
}

}  // namespace rsseg
