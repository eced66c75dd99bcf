/*
 * Generates the committed H.264 Annex B test fixtures with libx264 via
 * libavcodec.  Frames are a deterministic moving gradient plus LCG noise so
 * the encoder produces realistic I/P/B size variation without any external
 * media.  Run from the repo root:
 *
 *     cc tools/fixtures/encode_fixtures.c -o /tmp/encode_fixtures \
 *        $(pkg-config --cflags --libs libavcodec libavutil)
 *     /tmp/encode_fixtures tests/fixtures
 *
 * Outputs intra_only.264, ipp_gop12.264, ibbp_aud_slices.264.
 */
#include <libavcodec/avcodec.h>
#include <libavutil/opt.h>
#include <libavutil/imgutils.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#define W 64
#define H 64
#define NFRAMES 30

static uint32_t lcg_state = 0x12345678u;

static uint32_t lcg_next(void) {
    lcg_state = lcg_state * 1664525u + 1013904223u;
    return lcg_state;
}

static void fill_frame(AVFrame *frame, int idx) {
    /* moving diagonal gradient + per-pixel noise; abrupt change at frame 20
     * to provoke a mid-stream scene cut */
    int shift = (idx >= 20) ? 37 : idx * 3;
    for (int y = 0; y < H; y++) {
        for (int x = 0; x < W; x++) {
            int v = ((x + y + shift) * 2) & 0xFF;
            if (idx >= 20)
                v = 255 - v;
            v += (int)(lcg_next() % 17) - 8;
            if (v < 0) v = 0;
            if (v > 255) v = 255;
            frame->data[0][y * frame->linesize[0] + x] = (uint8_t)v;
        }
    }
    for (int y = 0; y < H / 2; y++) {
        for (int x = 0; x < W / 2; x++) {
            frame->data[1][y * frame->linesize[1] + x] = (uint8_t)(128 + ((x + shift) & 15));
            frame->data[2][y * frame->linesize[2] + x] = (uint8_t)(128 - ((y + shift) & 15));
        }
    }
}

static int encode_one(const char *path, const char *x264_params, int gop, int bframes) {
    const AVCodec *codec = avcodec_find_encoder_by_name("libx264");
    if (!codec) { fprintf(stderr, "libx264 encoder not found\n"); return 1; }

    AVCodecContext *ctx = avcodec_alloc_context3(codec);
    ctx->width = W;
    ctx->height = H;
    ctx->time_base = (AVRational){1, 30};
    ctx->framerate = (AVRational){30, 1};
    ctx->pix_fmt = AV_PIX_FMT_YUV420P;
    ctx->gop_size = gop;
    ctx->max_b_frames = bframes;
    ctx->bit_rate = 200000;
    /* no global header: SPS/PPS stay in-band, pure Annex B */
    av_opt_set(ctx->priv_data, "preset", "medium", 0);
    av_opt_set(ctx->priv_data, "x264-params", x264_params, 0);

    if (avcodec_open2(ctx, codec, NULL) < 0) { fprintf(stderr, "open failed\n"); return 1; }

    FILE *out = fopen(path, "wb");
    if (!out) { perror(path); return 1; }

    AVFrame *frame = av_frame_alloc();
    frame->format = ctx->pix_fmt;
    frame->width = W;
    frame->height = H;
    av_frame_get_buffer(frame, 0);

    AVPacket *pkt = av_packet_alloc();
    lcg_state = 0x12345678u;

    for (int i = 0; i <= NFRAMES; i++) {
        AVFrame *send = NULL;
        if (i < NFRAMES) {
            av_frame_make_writable(frame);
            fill_frame(frame, i);
            frame->pts = i;
            send = frame;
        }
        if (avcodec_send_frame(ctx, send) < 0) { fprintf(stderr, "send failed\n"); return 1; }
        for (;;) {
            int ret = avcodec_receive_packet(ctx, pkt);
            if (ret == AVERROR(EAGAIN) || ret == AVERROR_EOF)
                break;
            if (ret < 0) { fprintf(stderr, "receive failed\n"); return 1; }
            fwrite(pkt->data, 1, pkt->size, out);
            av_packet_unref(pkt);
        }
    }

    fclose(out);
    av_packet_free(&pkt);
    av_frame_free(&frame);
    avcodec_free_context(&ctx);
    printf("wrote %s\n", path);
    return 0;
}

int main(int argc, char **argv) {
    const char *dir = argc > 1 ? argv[1] : ".";
    char path[512];
    int rc = 0;

    snprintf(path, sizeof path, "%s/intra_only.264", dir);
    rc |= encode_one(path, "keyint=1:min-keyint=1:scenecut=0:repeat-headers=1", 1, 0);

    snprintf(path, sizeof path, "%s/ipp_gop12.264", dir);
    rc |= encode_one(path, "keyint=12:min-keyint=12:bframes=0", 12, 0);

    snprintf(path, sizeof path, "%s/ibbp_aud_slices.264", dir);
    rc |= encode_one(path, "keyint=12:min-keyint=12:bframes=2:b-adapt=0:aud=1:slices=2", 12, 2);

    return rc;
}
