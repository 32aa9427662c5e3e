#pragma once

#include "sweep/errors.hpp"
#include "sweep/geometry.hpp"
#include "sweep/control_set.hpp"
#include "sweep/scenario.hpp"
#include "sweep/trajectory.hpp"
#include "sweep/dynamics.hpp"
#include "sweep/casestudy.hpp"
#include "sweep/inner.hpp"
#include "sweep/bilevel.hpp"
#include "sweep/multipliers.hpp"
#include "sweep/nco.hpp"
#include "sweep/io.hpp"
