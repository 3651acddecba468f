#ifndef ADFRL_NN_CHECKPOINT_HPP
#define ADFRL_NN_CHECKPOINT_HPP

#include <map>
#include <span>
#include <string>

#include "adfrl/nn/optim.hpp"

namespace adfrl::nn {

// Versioned text checkpoint. Values are written as C hexfloats, which
// round-trip 64-bit doubles bit-exactly. Layout:
//
//   adfrl-params v1
//   meta <key> <value>            (zero or more)
//   param <name> <count>
//   <count space-separated hexfloat values on one line>
//   ...
//   end
void save_params(const std::string& path, std::span<ParamRef> params,
                 const std::map<std::string, std::string>& meta = {});

// Loads into the given parameter views; every stored name must match an
// existing parameter of identical size. Returns the meta entries.
std::map<std::string, std::string> load_params(const std::string& path,
                                               std::span<ParamRef> params);

} // namespace adfrl::nn

#endif
