#include <stdio.h>
#include <string.h>

#include "eaptop.h"

static const char *CONFIG =
    "max_iters = 2\n"
    "source_patch_length = 0.2\n"
    "[mesh]\n"
    "design_nx = 4\n"
    "design_ny = 4\n"
    "freespace_extent_factor = 2.0\n";

int main(void) {
    EapConfig *cfg = NULL;
    if (eap_config_from_toml("phi_p = \"x\"", &cfg) != EAP_STATUS_CONFIG || cfg != NULL) {
        fprintf(stderr, "bad config accepted\n");
        return 1;
    }
    if (eap_last_error_message() == NULL) {
        fprintf(stderr, "no error message\n");
        return 1;
    }
    if (eap_config_from_toml(CONFIG, &cfg) != EAP_STATUS_OK) {
        fprintf(stderr, "config: %s\n", eap_last_error_message());
        return 1;
    }
    EapRun *run = NULL;
    if (eap_run(cfg, &run) != EAP_STATUS_OK) {
        fprintf(stderr, "run: %s\n", eap_last_error_message());
        return 1;
    }
    EapSummary s;
    memset(&s, 0, sizeof s);
    if (eap_run_summary(run, &s) != EAP_STATUS_OK || s.iterations != 2) {
        fprintf(stderr, "summary\n");
        return 1;
    }
    double rho[16];
    size_t len = 0;
    if (eap_run_design(run, 1, rho, 16, &len) != EAP_STATUS_OK || len != 16) {
        fprintf(stderr, "design\n");
        return 1;
    }
    printf("iterations %zu g0 %.6e g1 %.6e\n", s.iterations, s.g0, s.g1);
    eap_run_free(run);
    eap_config_free(cfg);
    return 0;
}
