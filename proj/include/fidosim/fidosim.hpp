#pragma once

#include "fidosim/attack.hpp"
#include "fidosim/authenticator.hpp"
#include "fidosim/bytes.hpp"
#include "fidosim/cbor.hpp"
#include "fidosim/client.hpp"
#include "fidosim/crypto.hpp"
#include "fidosim/profiles.hpp"
#include "fidosim/report.hpp"
#include "fidosim/rng.hpp"
#include "fidosim/scenario.hpp"
#include "fidosim/sim_clock.hpp"
#include "fidosim/wire.hpp"
