#pragma once

#include "underband/common.hpp"
#include "underband/factorize.hpp"
#include "underband/harness.hpp"
#include "underband/io.hpp"
#include "underband/metrics.hpp"
#include "underband/selectors.hpp"
#include "underband/signal.hpp"
#include "underband/stft.hpp"
