#include <stdio.h>
#include "interposer_sim.h"

int main(void) {
    IsimConfig *cfg = NULL;
    IsimReport *rep = NULL;
    unsigned stages = 0;
    double ms = 0.0;

    if (isim_config_parse("[network]\nkind = trine\n", &cfg) != ISIM_STATUS_OK) {
        fprintf(stderr, "parse: %s\n", isim_last_error());
        return 1;
    }
    if (isim_sweep(cfg, "bus,trine", "lenet5", &rep) != ISIM_STATUS_OK) {
        fprintf(stderr, "sweep: %s\n", isim_last_error());
        return 1;
    }
    printf("rows=%zu\n", isim_report_row_count(rep));
    for (size_t i = 0; i < isim_report_row_count(rep); i++) {
        if (isim_report_metric(rep, i, ISIM_METRIC_MAKESPAN_S, &ms) != ISIM_STATUS_OK || ms <= 0.0)
            return 2;
        printf("%s %s %g\n", isim_report_row_topology(rep, i), isim_report_row_model(rep, i), ms);
    }
    if (isim_config_parse("[device]\n", &cfg) != ISIM_STATUS_CONFIG || isim_last_error() == NULL)
        return 3;
    if (isim_stage_count(32, 8, &stages) != ISIM_STATUS_OK)
        return 4;
    printf("stages=%u\n", stages);
    isim_report_free(rep);
    isim_config_free(cfg);
    return 0;
}
