"""Scripted answers for natural-language sub-problems.

The calculator never calls a language model; every NL snippet it can meet is
listed here with its value.  Lookups ignore case and collapse whitespace.
"""

from __future__ import annotations

from decimal import Decimal

from ata.errors import UnknownSnippetError

# short snippets, meant to stand in for one number inside an expression
INLINE = {
    "Average of 3, 7, and five?": 5,
    "Multiply the sum of three, seven, and five by two. Then, subtract fifteen.": 15,
    "If you subtract 3 from 43 and then divide by 5, what is the result?": 8,
    "Five added to twice the difference between twenty and the sum of seven and three.": 25,
    "Half of twenty.": 10,
    "The number of days in a week.": 7,
    "Twice the sum of two and four.": 12,
    "Three less than the product of four and five.": 17,
    "The square of three.": 9,
    "One dozen eggs minus eight eggs.": 4,
    "Eighteen divided by six.": 3,
    "The sum of eleven and nine, halved.": 10,
    "Six more than the number of sides on a triangle.": 9,
    "A quarter of forty.": 10,
    "Two pairs of shoes: how many shoes?": 4,
    "Subtract seven from twenty-two.": 15,
    "Double six, then add one.": 13,
    "The number of months in a year, minus ten.": 2,
}

# whole word problems, used as complete inputs
WORD_PROBLEMS = {
    (
        "Thomas withdraws $10000 in 20 dollar bills from the bank account. He loses 100 bills while getting home. "
        "After that, he uses half of the remaining bills to pay for a bill. Thomas then triples his money. "
        "He then converts all his bills to 10 dollar bills. How many 5 dollar bills does he have?"
    ): 1200,
    (
        "To participate in the local community tree-planting campaign, Mr. Julius planted twenty White Oak trees "
        "and twice as many Lodgepole Pine trees on the first day. On the second day, he planted additional White Oak "
        "trees and 1/4 more Lodgepole Pine trees than on the first day. If the total number of trees planted over "
        "both days is 140, how many more White Oak trees did Mr. Julius plant on the second day?"
    ): 30,
    "Maria buys 4 boxes of pencils with 12 pencils in each box. She gives away 18 pencils. How many pencils does she have left?": 30,
    (
        "A train travels 60 kilometers per hour for 3 hours and then 40 kilometers per hour for 2 hours. "
        "How many kilometers does it travel in total?"
    ): 260,
    "A baker makes 154 cookies and packs them into bags of 6, keeping the leftovers. How many cookies are left over?": 4,
    "Tom has three times as many marbles as Sam. Together they have 48 marbles. How many marbles does Tom have?": 36,
    "A rectangle is 9 meters long and 5 meters wide. What is its perimeter in meters?": 28,
    "Lena reads 25 pages a day for 6 days and then 40 pages on the seventh day. How many pages did she read?": 190,
    "A shop sells pens at 3 dollars each. Ana pays with a 50 dollar bill for 12 pens. How much change does she get?": 14,
    "There are 8 rows of chairs with 15 chairs in each row. 27 chairs are empty. How many chairs are occupied?": 93,
}


def normalize(text: str) -> str:
    return " ".join(text.split()).casefold()


SCRIPTED: dict[str, Decimal] = {normalize(k): Decimal(v) for k, v in {**INLINE, **WORD_PROBLEMS}.items()}


def lookup(text: str) -> Decimal:
    try:
        return SCRIPTED[normalize(text)]
    except KeyError:
        raise UnknownSnippetError(text) from None
