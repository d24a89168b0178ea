#pragma once

#include "hsync/errors.hpp"
#include "hsync/random.hpp"
#include "hsync/photon_statistics.hpp"
#include "hsync/sync_protocol.hpp"
#include "hsync/interference.hpp"
#include "hsync/config.hpp"
#include "hsync/harness.hpp"
