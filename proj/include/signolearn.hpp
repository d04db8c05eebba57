#pragma once

#include "signolearn/classifier.hpp"
#include "signolearn/dataset.hpp"
#include "signolearn/error.hpp"
#include "signolearn/explain.hpp"
#include "signolearn/model_io.hpp"
#include "signolearn/optim.hpp"
#include "signolearn/parallel.hpp"
#include "signolearn/regressor.hpp"
#include "signolearn/rng.hpp"
#include "signolearn/search.hpp"
#include "signolearn/signomial.hpp"
