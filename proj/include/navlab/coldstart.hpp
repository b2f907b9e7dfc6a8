#pragma once

#include <span>
#include <vector>

#include "navlab/cot_engine.hpp"
#include "navlab/fis.hpp"
#include "navlab/policy.hpp"
#include "navlab/scene_io.hpp"

namespace navlab::coldstart {

// Behaviour-cloning sequences for the fast policy, one per episode. Contexts
// are rebuilt by replaying the reference actions under the FiS schedule with
// the given budget; targets are the decisions of the kept records.
std::vector<policy::Sequence> navigation_sequences(const policy::FisPolicy& model,
                                                   std::span<const cot::RawRecord> records,
                                                   std::span<const env::Episode> suite,
                                                   const env::SceneLibrary& scenes, const fis::FisConfig& cfg,
                                                   std::size_t budget);

// Token sequences of the kept traces; traces longer than the policy allows are skipped.
std::vector<policy::Sequence> trace_sequences(const policy::TracePolicy& model,
                                              std::span<const cot::RawRecord> records);

struct SftRun {
    policy::ParamVector params;
    std::vector<double> nll;  // mean NLL before each epoch
};

// Full-batch gradient descent for `epochs` steps.
SftRun supervised_train(const policy::Model& model, policy::ParamVector init,
                        std::span<const policy::Sequence> batch, std::size_t epochs, double learning_rate);

}  // namespace navlab::coldstart
