#pragma once

#include "unweave/errors.hpp"
#include "unweave/geometry.hpp"
#include "unweave/crossings.hpp"
#include "unweave/cable_graph.hpp"
#include "unweave/serialize.hpp"
#include "unweave/image.hpp"
#include "unweave/perception.hpp"
#include "unweave/transition.hpp"
#include "unweave/planner.hpp"
#include "unweave/simworld.hpp"
#include "unweave/harness.hpp"
#include "unweave/config.hpp"
