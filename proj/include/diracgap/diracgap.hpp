#pragma once

#include "diracgap/asymptotics.hpp"
#include "diracgap/bifurcation.hpp"
#include "diracgap/error.hpp"
#include "diracgap/linalg.hpp"
#include "diracgap/model.hpp"
#include "diracgap/ode.hpp"
#include "diracgap/prufer.hpp"
#include "diracgap/spectrum.hpp"
