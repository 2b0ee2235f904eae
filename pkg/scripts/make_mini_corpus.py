#!/usr/bin/env python3
"""Regenerate data/mini_corpus.jsonl, the bundled 60-pair how-to fixture.

Deterministic: body/abstract pairs are composed from fixed Vietnamese phrase
pools with a seeded generator, NFC-normalized, single-spaced. The committed
fixture is the output of this script with the default seed.
"""

import json
import random
import unicodedata
from pathlib import Path

TOPICS = [
    ("máy tính", "lau bụi quạt tản nhiệt", "kiểm tra nhiệt độ máy"),
    ("điện thoại", "tháo ốp lưng ra trước", "sao lưu dữ liệu quan trọng"),
    ("xe đạp", "tra dầu vào xích", "bơm lốp đúng áp suất"),
    ("cây cảnh", "tưới nước vào sáng sớm", "cắt bỏ lá úa vàng"),
    ("bánh mì", "nhào bột thật kỹ", "ủ bột nơi ấm áp"),
    ("cà phê", "xay hạt vừa đủ mịn", "đun nước tới chín mươi độ"),
    ("tủ lạnh", "rút điện trước khi lau", "xếp thực phẩm theo ngăn"),
    ("máy giặt", "vệ sinh lồng giặt định kỳ", "không giặt quá tải trọng"),
    ("khu vườn", "nhổ cỏ dại quanh gốc", "bón phân hữu cơ đều đặn"),
    ("bức tranh", "chọn khung phù hợp màu tường", "treo ở nơi tránh nắng gắt"),
    ("đôi giày", "phơi khô tự nhiên trong bóng râm", "nhét giấy báo giữ dáng"),
    ("căn bếp", "lau mặt bếp sau mỗi bữa", "phân loại rác ngay tại chỗ"),
    ("bể cá", "thay một phần ba nước mỗi tuần", "kiểm tra máy lọc thường xuyên"),
    ("nồi cơm", "vo gạo nhẹ tay hai lần", "lau khô đáy nồi trước khi nấu"),
    ("quyển sách", "bọc bìa bằng giấy kiếng", "đặt xa nơi ẩm thấp"),
]

VERBS = ["bảo quản", "làm sạch", "sửa soạn", "chăm sóc", "sắp xếp", "chuẩn bị"]
OPENERS = [
    "Trước tiên bạn nên",
    "Sau đó hãy",
    "Tiếp theo cần",
    "Đừng quên",
    "Cuối cùng nhớ",
]
EXTRAS = [
    "để mọi thứ luôn bền đẹp theo thời gian",
    "nhằm tiết kiệm chi phí sửa chữa về sau",
    "vì thói quen nhỏ này giúp ích rất nhiều",
    "bởi cách làm này được nhiều người tin dùng",
    "và kết quả sẽ khiến bạn hài lòng",
]
ABSTRACT_TAILS = [
    "tại nhà một cách đơn giản",
    "cho người mới bắt đầu",
    "theo từng bước dễ nhớ",
    "bằng vật dụng sẵn có",
]


def build(seed: int = 2024, n: int = 60):
    rng = random.Random(seed)
    examples = []
    for i in range(n):
        topic, step_a, step_b = TOPICS[i % len(TOPICS)]
        verb = rng.choice(VERBS)
        steps = [step_a, step_b] + rng.sample([t[1] for t in TOPICS if t[0] != topic], 2)
        rng.shuffle(steps)
        sentences = [f"Để {verb} {topic} đúng cách, bạn cần một chút kiên nhẫn."]
        for opener, step in zip(rng.sample(OPENERS, len(OPENERS))[:len(steps)], steps):
            sentences.append(f"{opener} {step} {rng.choice(EXTRAS)}.")
        body = " ".join(sentences)
        abstract = f"Hướng dẫn {verb} {topic} {rng.choice(ABSTRACT_TAILS)}."
        examples.append({
            "id": f"mini-{i + 1:04d}",
            "body": unicodedata.normalize("NFC", body),
            "abstract": unicodedata.normalize("NFC", abstract),
        })
    return examples


def main():
    out = Path(__file__).resolve().parent.parent / "data" / "mini_corpus.jsonl"
    out.parent.mkdir(exist_ok=True)
    with open(out, "w", encoding="utf-8") as f:
        for ex in build():
            f.write(json.dumps(ex, ensure_ascii=False) + "\n")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
