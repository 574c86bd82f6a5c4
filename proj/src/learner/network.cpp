#include "carmi/learner/network.hpp"

namespace carmi {

void to_json(nlohmann::json& j, const NetConfig& c) {
  j = {{"width", c.width}, {"height", c.height},       {"vector_dim", c.vector_dim}, {"conv1", c.conv1},
       {"conv2", c.conv2}, {"map_dense", c.map_dense}, {"vec_dense", c.vec_dense},   {"fused", c.fused}};
}

void from_json(const nlohmann::json& j, NetConfig& c) {
  const NetConfig d;
  c.width = j.value("width", d.width);
  c.height = j.value("height", d.height);
  c.vector_dim = j.value("vector_dim", d.vector_dim);
  c.conv1 = j.value("conv1", d.conv1);
  c.conv2 = j.value("conv2", d.conv2);
  c.map_dense = j.value("map_dense", d.map_dense);
  c.vec_dense = j.value("vec_dense", d.vec_dense);
  c.fused = j.value("fused", d.fused);
  if (c.width < 1 || c.height < 1 || c.vector_dim < 1 || c.conv1 < 1 || c.conv2 < 1 || c.map_dense < 1 ||
      c.vec_dense < 1 || c.fused < 1)
    throw Error("network config: every size must be positive");
}

}  // namespace carmi
