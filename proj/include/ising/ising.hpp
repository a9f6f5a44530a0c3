#pragma once

#include "ising/cluster.hpp"
#include "ising/configuration.hpp"
#include "ising/dynamics.hpp"
#include "ising/errors.hpp"
#include "ising/functional.hpp"
#include "ising/kernel.hpp"
#include "ising/model.hpp"
#include "ising/parallel.hpp"
#include "ising/rng.hpp"
#include "ising/spectra.hpp"
