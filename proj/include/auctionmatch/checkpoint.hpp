#ifndef AUCTIONMATCH_CHECKPOINT_HPP
#define AUCTIONMATCH_CHECKPOINT_HPP

#include <string>

#include "auctionmatch/config.hpp"
#include "auctionmatch/mechanism.hpp"
#include "auctionmatch/training.hpp"

namespace am {

// On-disk model snapshot. Text preamble, then a raw little-endian double
// payload whose layout is fully determined by the embedded config:
//
//   auctionmatch-checkpoint-v1
//   batches-done <N>
//   config-lines <K>
//   <K canonical config lines>
//   payload <D>
//   <D doubles: alloc/pay net weights+biases in param_refs order,
//    then lambda[agents], then rho>
//
// Round-trips are bit exact. Loads throw CheckpointError: version_mismatch
// for a foreign or future file, truncated for a short read, shape_mismatch
// when the payload disagrees with the config.
struct Checkpoint {
  Config config;
  MechanismParams params;
  TrainState state;  // lambda/rho/batches_done; optimizer moments not kept
};

// Writes to path via a temp file + rename so readers never see a torn file.
void save_checkpoint(const std::string& path, const Config& config,
                     const MechanismParams& params, const TrainState& state);

Checkpoint load_checkpoint(const std::string& path);

}  // namespace am

#endif
