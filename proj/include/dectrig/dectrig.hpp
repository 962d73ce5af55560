#pragma once

#include <dectrig/adaptation.hpp>
#include <dectrig/core.hpp>
#include <dectrig/io.hpp>
#include <dectrig/ode.hpp>
#include <dectrig/plant.hpp>
#include <dectrig/sim.hpp>
#include <dectrig/trigger.hpp>
