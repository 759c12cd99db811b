#pragma once

#include "nsp/grid.hpp"
#include "nsp/fft.hpp"
#include "nsp/spectral_field.hpp"
#include "nsp/operators.hpp"
#include "nsp/littlewood_paley.hpp"
#include "nsp/nsp_model.hpp"
#include "nsp/linear_block.hpp"
#include "nsp/friedrichs_stepper.hpp"
#include "nsp/energy_monitor.hpp"
