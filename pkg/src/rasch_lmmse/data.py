"""Response-data ingestion: triplet CSV files and MovieLens-format ratings.

Observations are (user, item, response) with responses in {-1, +1}.
Original IDs of arbitrary string form are densified to 0-based indices in
first-appearance order, which makes loading deterministic.
"""

from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ResponseSet:
    """Sparse set of one-bit responses with dense 0-based index maps.

    users, items, responses are parallel arrays; user_ids / item_ids map a
    dense index back to the original ID (first-appearance order).
    """

    users: np.ndarray
    items: np.ndarray
    responses: np.ndarray
    num_users: int
    num_items: int
    user_ids: tuple = ()
    item_ids: tuple = ()

    def __post_init__(self):
        users = np.asarray(self.users, dtype=np.int64).ravel()
        items = np.asarray(self.items, dtype=np.int64).ravel()
        responses = np.asarray(self.responses, dtype=np.float64).ravel()
        n = len(users)
        if len(items) != n or len(responses) != n:
            raise ValueError("users, items, responses must have equal length")
        if n:
            if users.min() < 0 or users.max() >= self.num_users:
                raise ValueError("user index out of range")
            if items.min() < 0 or items.max() >= self.num_items:
                raise ValueError("item index out of range")
            if not np.all(np.abs(responses) == 1.0):
                raise ValueError("responses must be +1 or -1")
            pairs = users * self.num_items + items
            uniq, counts = np.unique(pairs, return_counts=True)
            if len(uniq) != n:
                dup = uniq[np.argmax(counts > 1)]
                raise ValueError(
                    f"duplicate (user, item) pair at dense indices "
                    f"({dup // self.num_items}, {dup % self.num_items})"
                )
        object.__setattr__(self, "users", users)
        object.__setattr__(self, "items", items)
        object.__setattr__(self, "responses", responses)
        object.__setattr__(self, "user_ids", tuple(self.user_ids))
        object.__setattr__(self, "item_ids", tuple(self.item_ids))

    def __len__(self):
        return len(self.users)

    def user_index(self):
        """Original user ID -> dense index."""
        return {uid: k for k, uid in enumerate(self.user_ids)}

    def item_index(self):
        """Original item ID -> dense index."""
        return {iid: k for k, iid in enumerate(self.item_ids)}


class _Densifier:
    """Assigns 0-based indices to IDs in first-appearance order."""

    def __init__(self):
        self.index = {}
        self.ids = []

    def __call__(self, key):
        k = self.index.get(key)
        if k is None:
            k = len(self.ids)
            self.index[key] = k
            self.ids.append(key)
        return k


def _parse_response(token, label_convention, path, line_no):
    token = token.strip()
    if label_convention == "pm_one":
        if token in ("1", "+1"):
            return 1.0
        if token == "-1":
            return -1.0
    elif label_convention == "zero_one":
        if token == "1":
            return 1.0
        if token == "0":
            return -1.0
    else:
        raise ValueError(f"unknown label_convention {label_convention!r}")
    raise ValueError(
        f"{path}, line {line_no}: unknown response value {token!r} "
        f"for convention {label_convention!r}"
    )


def load_triplets(path, label_convention: str = "pm_one") -> ResponseSet:
    """Read a headered CSV `user,item,response` into a ResponseSet.

    With label_convention "zero_one", 0 maps to -1 and 1 to +1.  IDs are
    arbitrary strings, densified in first-appearance order.  Malformed rows
    and duplicate pairs raise ValueError naming the line.
    """
    users, items, responses = [], [], []
    dense_u, dense_i = _Densifier(), _Densifier()
    seen = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file, expected header user,item,response")
        if [h.strip() for h in header] != ["user", "item", "response"]:
            raise ValueError(
                f"{path}, line 1: expected header user,item,response, got {header!r}"
            )
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ValueError(
                    f"{path}, line {line_no}: expected 3 fields, got {len(row)}"
                )
            uid, iid = row[0].strip(), row[1].strip()
            resp = _parse_response(row[2], label_convention, path, line_no)
            if (uid, iid) in seen:
                raise ValueError(
                    f"{path}, line {line_no}: duplicate pair (user={uid!r}, item={iid!r})"
                )
            seen.add((uid, iid))
            users.append(dense_u(uid))
            items.append(dense_i(iid))
            responses.append(resp)
    return ResponseSet(
        users=np.array(users, dtype=np.int64),
        items=np.array(items, dtype=np.int64),
        responses=np.array(responses),
        num_users=len(dense_u.ids),
        num_items=len(dense_i.ids),
        user_ids=tuple(dense_u.ids),
        item_ids=tuple(dense_i.ids),
    )


def save_triplets(data: ResponseSet, path, label_convention: str = "pm_one"):
    """Write a ResponseSet as a headered CSV (round-trips with load_triplets)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["user", "item", "response"])
        for u, i, r in zip(data.users, data.items, data.responses):
            uid = data.user_ids[u] if data.user_ids else str(u)
            iid = data.item_ids[i] if data.item_ids else str(i)
            if label_convention == "pm_one":
                token = "1" if r > 0 else "-1"
            elif label_convention == "zero_one":
                token = "1" if r > 0 else "0"
            else:
                raise ValueError(f"unknown label_convention {label_convention!r}")
            writer.writerow([uid, iid, token])


def load_movielens(path) -> list:
    """Read a MovieLens-format ratings file (tab-separated user, item, rating, timestamp).

    Returns a list of (user_id, item_id, rating) with integer ratings
    validated to lie in 1..5.  The canonical ml-100k u.data file yields
    100,000 rows over 943 users and 1682 items.
    """
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ValueError(
                    f"{path}, line {line_no}: expected 4 tab-separated fields, "
                    f"got {len(parts)}"
                )
            try:
                uid, iid, rating = int(parts[0]), int(parts[1]), int(parts[2])
            except ValueError:
                raise ValueError(f"{path}, line {line_no}: non-integer field")
            if not 1 <= rating <= 5:
                raise ValueError(
                    f"{path}, line {line_no}: rating {rating} outside 1..5"
                )
            rows.append((uid, iid, rating))
    return rows


def binarize_ratings(ratings) -> ResponseSet:
    """Binarize ratings against the global mean: +1 above, -1 below, ties dropped.

    The mean is taken over all input rows; rows with rating exactly equal
    to the mean are dropped (warned, with the count).  Indices are
    densified over the retained rows only.
    """
    if not ratings:
        raise ValueError("ratings list is empty")
    values = np.array([r[2] for r in ratings], dtype=np.float64)
    mu = float(values.mean())
    dense_u, dense_i = _Densifier(), _Densifier()
    users, items, responses = [], [], []
    dropped = 0
    for (uid, iid, rating) in ratings:
        if rating == mu:
            dropped += 1
            continue
        users.append(dense_u(uid))
        items.append(dense_i(iid))
        responses.append(1.0 if rating > mu else -1.0)
    if dropped:
        warnings.warn(
            f"dropped {dropped} rating(s) exactly equal to the global mean {mu:g}",
            stacklevel=2,
        )
    out = ResponseSet(
        users=np.array(users, dtype=np.int64),
        items=np.array(items, dtype=np.int64),
        responses=np.array(responses),
        num_users=len(dense_u.ids),
        num_items=len(dense_i.ids),
        user_ids=tuple(dense_u.ids),
        item_ids=tuple(dense_i.ids),
    )
    logger.info(
        "binarized %d ratings at mean %.4f: retained %d (+1: %d, -1: %d), "
        "users %d, items %d",
        len(ratings), mu, len(out),
        int(np.sum(out.responses > 0)), int(np.sum(out.responses < 0)),
        out.num_users, out.num_items,
    )
    return out
