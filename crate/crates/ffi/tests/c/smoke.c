#include <stdio.h>
#include <string.h>

#include "selfsync.h"

static void on_change(void *user_data, size_t node, SsActivity activity) {
    (void)node;
    (void)activity;
    ++*(int *)user_data;
}

#define CHECK(expr)                                                           \
    do {                                                                      \
        SsStatus st_ = (expr);                                                \
        if (st_ != SS_STATUS_OK) {                                            \
            fprintf(stderr, "%s failed (%d): %s\n", #expr, (int)st_,         \
                    ss_last_error());                                         \
            return 1;                                                         \
        }                                                                     \
    } while (0)

int main(void) {
    SsConfig *cfg = NULL;
    SsSimulation *sim = NULL;
    SsTraceRecord rec;
    int changes = 0;
    uint32_t handle = 0;

    CHECK(ss_config_default(&cfg));
    CHECK(ss_config_set(cfg, "network.nodes=20"));
    CHECK(ss_config_set(cfg, "protocol.p_a=0.05"));
    if (ss_config_set(cfg, "network.p_loss=3") != SS_STATUS_CONFIG_ERROR) {
        fprintf(stderr, "invalid override accepted\n");
        return 1;
    }
    CHECK(ss_simulation_new(cfg, &sim));
    ss_config_free(cfg);

    CHECK(ss_simulation_register_callback(sim, 0, on_change, &changes, &handle));
    for (int i = 0; i < 500; ++i) {
        CHECK(ss_simulation_step(sim, &rec));
    }
    CHECK(ss_simulation_unregister_callback(sim, 0, handle));

    SsNodeState st;
    CHECK(ss_simulation_node_state(sim, 0, &st));
    ss_simulation_free(sim);

    printf("period=%llu activity=%.6f battery=%.6f changes=%d version=%s\n",
           (unsigned long long)rec.period, rec.mean_activity, rec.mean_battery,
           changes, ss_version());
    return rec.period == 499 && changes > 0 ? 0 : 1;
}
