#include <stdio.h>
#include <string.h>
#include "alps.h"

int main(void) {
    AlpsConfig *cfg = NULL;
    if (alps_config_default(&cfg) != ALPS_STATUS_OK) return 1;

    size_t len = 0;
    if (alps_ladder_betas(cfg, NULL, 0, &len) != ALPS_STATUS_OK || len < 2) return 2;
    double betas[256];
    if (len > 256 || alps_ladder_betas(cfg, betas, 256, &len) != ALPS_STATUS_OK) return 3;
    if (betas[0] != 1.0) return 4;

    AlpsChain *chain = NULL;
    if (alps_chain_new(cfg, 42, &chain) != ALPS_STATUS_OK) return 5;
    AlpsStep step;
    if (alps_chain_step(chain, 10000, &step) != ALPS_STATUS_OK) return 6;
    size_t rung = 0;
    double beta = 0.0;
    alps_chain_state(chain, NULL, &rung, &beta);
    if (rung != step.rung || beta != betas[rung]) return 7;

    AlpsConfig *bad = NULL;
    if (alps_config_from_toml("dimension = -1", &bad) == ALPS_STATUS_OK) return 8;
    if (strlen(alps_last_error()) == 0) return 9;

    alps_chain_free(chain);
    alps_config_free(cfg);
    printf("ok %s\n", alps_version());
    return 0;
}
