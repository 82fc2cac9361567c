#pragma once

#include "core.hpp"
#include "rng.hpp"
#include "lattice.hpp"
#include "kodaira.hpp"
#include "metric.hpp"
#include "diffgeo.hpp"
#include "parallel.hpp"
#include "asymptotics.hpp"
#include "gluing.hpp"
#include "weierstrass.hpp"
#include "scenario.hpp"
