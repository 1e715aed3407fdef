#pragma once

// Umbrella header. The JSON run configuration lives separately in
// elastic/run_config.hpp because it needs nlohmann/json.

#include "elastic/types.hpp"
#include "elastic/mesh.hpp"
#include "elastic/mesh_io.hpp"
#include "elastic/primitives.hpp"
#include "elastic/features.hpp"
#include "elastic/varifold.hpp"
#include "elastic/energy.hpp"
#include "elastic/lbfgs.hpp"
#include "elastic/pipeline.hpp"
