#pragma once

#include "specctrl/linalg.hpp"
#include "specctrl/plant_builders.hpp"
#include "specctrl/simulation.hpp"
#include "specctrl/spectral_model.hpp"
#include "specctrl/studies.hpp"
#include "specctrl/synthesis.hpp"
#include "specctrl/types.hpp"
