#ifndef ENCFM_H
#define ENCFM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes shared by all functions.
typedef enum EncfmStatus {
  ENCFM_STATUS_OK = 0,
  ENCFM_STATUS_NULL_ARGUMENT = 1,
  ENCFM_STATUS_INVALID_ARGUMENT = 2,
  ENCFM_STATUS_IO = 3,
  ENCFM_STATUS_FORMAT = 4,
  // Wrong key or damaged index; the two cannot be told apart.
  ENCFM_STATUS_DECRYPTION = 5,
  ENCFM_STATUS_INTERNAL = 6,
} EncfmStatus;

// An open index. Create with [`encfm_open`], release with [`encfm_close`].
typedef struct EncfmIndex EncfmIndex;

typedef struct EncfmHit {
  uint64_t item;
  uint64_t offset;
} EncfmHit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or an empty string.
// The pointer stays valid until the next call on this thread.
const char *encfm_last_error(void);

// Writes a new random key file. Fails if the file exists and `force` is 0.
//
// # Safety
// `key_path` must be a NUL-terminated string.
enum EncfmStatus encfm_keygen(const char *key_path, int32_t force);

// Builds an index of the FASTA file at `fasta_path` and writes it to
// `index_path`. `threads` of 0 means one.
//
// # Safety
// All paths must be NUL-terminated strings.
enum EncfmStatus encfm_build(const char *fasta_path,
                             const char *key_path,
                             const char *index_path,
                             uint32_t k,
                             uint32_t block_size,
                             uint32_t sample_rate,
                             uint32_t threads);

// Opens an index. On success `*out` holds a handle for [`encfm_close`].
//
// # Safety
// Paths must be NUL-terminated strings; `out` must be writable.
enum EncfmStatus encfm_open(const char *index_path, const char *key_path, struct EncfmIndex **out);

// Releases a handle from [`encfm_open`]. Null is ignored.
//
// # Safety
// `index` must come from [`encfm_open`] and not be used afterwards.
void encfm_close(struct EncfmIndex *index);

// # Safety
// `index` must be a live handle and `out` writable.
enum EncfmStatus encfm_item_count(const struct EncfmIndex *index, uint64_t *out);

// Number of occurrences of the `len` pattern bytes.
//
// # Safety
// `pattern` must point to `len` readable bytes; `out` must be writable.
enum EncfmStatus encfm_count(const struct EncfmIndex *index,
                             const uint8_t *pattern,
                             uintptr_t len,
                             uint64_t *out);

// All occurrences, sorted by item then offset. Release `*hits` with
// [`encfm_hits_free`]; it is null when `*hit_count` is 0.
//
// # Safety
// `pattern` must point to `len` readable bytes; `hits` and `hit_count`
// must be writable.
enum EncfmStatus encfm_locate(const struct EncfmIndex *index,
                              const uint8_t *pattern,
                              uintptr_t len,
                              struct EncfmHit **hits,
                              uintptr_t *hit_count);

// # Safety
// Arguments must be exactly what [`encfm_locate`] returned.
void encfm_hits_free(struct EncfmHit *hits, uintptr_t hit_count);

// Copies `len` bases of `item` starting at `start`. Release `*bases` with
// [`encfm_bytes_free`].
//
// # Safety
// `bases` and `bases_len` must be writable.
enum EncfmStatus encfm_extract(const struct EncfmIndex *index,
                               uint64_t item,
                               uint64_t start,
                               uint64_t len,
                               uint8_t **bases,
                               uintptr_t *bases_len);

// # Safety
// Arguments must be exactly what [`encfm_extract`] returned.
void encfm_bytes_free(uint8_t *bases, uintptr_t bases_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ENCFM_H */
