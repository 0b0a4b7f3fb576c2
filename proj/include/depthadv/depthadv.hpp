#pragma once

// Umbrella header: adversarial perturbation toolkit for monocular depth
// regression networks.

#include "depthadv/attack.hpp"
#include "depthadv/campaign.hpp"
#include "depthadv/config.hpp"
#include "depthadv/defenses.hpp"
#include "depthadv/errors.hpp"
#include "depthadv/graph.hpp"
#include "depthadv/image_io.hpp"
#include "depthadv/metrics.hpp"
#include "depthadv/model.hpp"
#include "depthadv/parallel.hpp"
#include "depthadv/rng.hpp"
#include "depthadv/scene.hpp"
#include "depthadv/targets.hpp"
#include "depthadv/tensor.hpp"
#include "depthadv/train.hpp"
