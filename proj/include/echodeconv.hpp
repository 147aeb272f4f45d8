#pragma once

#include "echodeconv/deconv.hpp"
#include "echodeconv/experiment.hpp"
#include "echodeconv/hosa.hpp"
#include "echodeconv/io.hpp"
#include "echodeconv/metrics.hpp"
#include "echodeconv/signal.hpp"
#include "echodeconv/simulator.hpp"
#include "echodeconv/wavelet.hpp"
