#pragma once

#include "convbf/bench.hpp"
#include "convbf/convolution.hpp"
#include "convbf/distributions.hpp"
#include "convbf/errors.hpp"
#include "convbf/export.hpp"
#include "convbf/kalman.hpp"
#include "convbf/linalg.hpp"
#include "convbf/models.hpp"
#include "convbf/nonlinear.hpp"
#include "convbf/particle.hpp"
#include "convbf/random.hpp"
#include "convbf/validation.hpp"
